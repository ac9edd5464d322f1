#include "duo/motion/normalize.h"

#include <cmath>

#include "duo/error.h"

namespace duo::motion {

void NormStats::validate() const {
    if (mean.size() != std.size() || mean.size() == 0) throw DegenerateStats("normalization stats have mismatched sizes");
    if (!mean.allFinite() || !std.allFinite()) throw DegenerateStats("normalization stats are not finite");
    if ((std.array() <= 1e-8).any()) throw DegenerateStats("normalization std must exceed 1e-8");
}

nlohmann::json NormStats::to_json() const {
    return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
            {"std", std::vector<double>(std.data(), std.data() + std.size())}};
}

NormStats NormStats::from_json(const nlohmann::json& j) {
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto s = j.at("std").get<std::vector<double>>();
    NormStats out;
    out.mean = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    out.std = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    out.validate();
    return out;
}

NormStats NormStats::identity(int dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

NormStats fit_norm_stats(const Dataset& data) {
    if (data.empty()) throw DegenerateStats("cannot fit normalization on an empty dataset");
    const auto dim = data.front().person_a.data.cols();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    double count = 0;
    auto accumulate_mean = [&](const MotionSequence& s) {
        if (s.data.cols() != dim) throw ShapeMismatch("dataset mixes feature dimensions");
        sum += s.data.cast<double>().colwise().sum().transpose();
        count += static_cast<double>(s.data.rows());
    };
    for (const auto& p : data) {
        accumulate_mean(p.person_a);
        accumulate_mean(p.person_b);
    }
    const Eigen::VectorXd mean = sum / count;
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
    auto accumulate_var = [&](const MotionSequence& s) {
        const Eigen::MatrixXd centered = s.data.cast<double>().rowwise() - mean.transpose();
        sq += centered.array().square().colwise().sum().matrix().transpose();
    };
    for (const auto& p : data) {
        accumulate_var(p.person_a);
        accumulate_var(p.person_b);
    }
    NormStats stats;
    stats.mean = mean;
    stats.std = (sq / count).array().sqrt().max(NormStats::kStdFloor).matrix();
    return stats;
}

MotionSequence znorm(const MotionSequence& seq, const NormStats& stats) {
    stats.validate();
    if (stats.mean.size() != seq.data.cols()) throw ShapeMismatch("stats dimension does not match sequence");
    const Eigen::MatrixXd x = seq.data.cast<double>();
    const Eigen::MatrixXd z = (x.rowwise() - stats.mean.transpose()).array().rowwise() / stats.std.transpose().array();
    return MotionSequence(seq.layout, z.cast<float>());
}

MotionSequence denorm(const MotionSequence& seq, const NormStats& stats) {
    stats.validate();
    if (stats.mean.size() != seq.data.cols()) throw ShapeMismatch("stats dimension does not match sequence");
    const Eigen::MatrixXd z = seq.data.cast<double>();
    const Eigen::MatrixXd x = (z.array().rowwise() * stats.std.transpose().array()).matrix().rowwise() + stats.mean.transpose();
    return MotionSequence(seq.layout, x.cast<float>());
}

}  // namespace duo::motion
