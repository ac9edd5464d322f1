#include "duo/metrics/extractor.h"

#include <cmath>

#include "duo/error.h"
#include "duo/util/random.h"

namespace duo::metrics {

motion::FrameMatrix resample_frames(const motion::FrameMatrix& data, int frames) {
    if (data.rows() < 1 || frames < 1) throw InvalidArgument("resample_frames: empty input or target");
    motion::FrameMatrix out(frames, data.cols());
    const auto n = data.rows();
    for (int f = 0; f < frames; ++f) {
        const double t = frames > 1 ? static_cast<double>(f) * static_cast<double>(n - 1) / (frames - 1) : 0.0;
        const auto i0 = static_cast<Eigen::Index>(std::floor(t));
        const auto i1 = std::min<Eigen::Index>(i0 + 1, n - 1);
        const auto w = static_cast<float>(t - static_cast<double>(i0));
        out.row(f) = (1.0f - w) * data.row(i0) + w * data.row(i1);
    }
    return out;
}

RandomProjectionExtractor::RandomProjectionExtractor(int feature_dim, std::optional<motion::NormStats> stats,
                                                     int out_dim, int frames, std::uint64_t seed)
    : feature_dim_(feature_dim), stats_(std::move(stats)), out_dim_(out_dim), frames_(frames), text_(out_dim, seed) {
    if (feature_dim < 1 || out_dim < 1 || frames < 1) throw InvalidArgument("extractor sizes must be positive");
    const int in = 2 * frames * feature_dim;
    projection_.resize(out_dim, in);
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (int r = 0; r < out_dim; ++r)
        for (int c = 0; c < in; ++c) projection_(r, c) = rng.normal() * scale;
}

Eigen::VectorXd RandomProjectionExtractor::motion(const motion::InteractionPair& pair) const {
    if (pair.person_a.data.cols() != feature_dim_) throw ShapeMismatch("extractor feature width mismatch");
    Eigen::VectorXd flat(2 * frames_ * feature_dim_);
    Eigen::Index off = 0;
    for (const auto* seq : {&pair.person_a, &pair.person_b}) {
        const auto normed = stats_ ? motion::znorm(*seq, *stats_).data : seq->data;
        const auto r = resample_frames(normed, frames_);
        for (Eigen::Index i = 0; i < r.size(); ++i) flat[off + i] = r.data()[i];
        off += r.size();
    }
    return projection_ * flat;
}

Eigen::VectorXd RandomProjectionExtractor::text(const std::string& caption) const {
    return text_.encode(caption).cast<double>();
}

std::string RandomProjectionExtractor::name() const {
    return "random-projection(" + std::to_string(out_dim_) + "d, " + std::to_string(frames_) + " frames)";
}

}  // namespace duo::metrics
