#include "duo/metrics/report.h"

#include <algorithm>
#include <map>

#include "duo/error.h"

namespace duo::metrics {

namespace {

Features motion_features(const motion::Dataset& data, const FeatureExtractor& ex) {
    Features f(static_cast<Eigen::Index>(data.size()), ex.dim());
    for (std::size_t i = 0; i < data.size(); ++i) f.row(static_cast<Eigen::Index>(i)) = ex.motion(data[i]).transpose();
    return f;
}

template <typename T>
nlohmann::json opt(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

EvalReport evaluate_fidelity(const motion::Dataset& generated, const motion::Dataset& reference,
                             const FeatureExtractor& extractor, const FidelityOptions& options) {
    EvalReport r;
    r.generated = static_cast<int>(generated.size());
    r.reference = static_cast<int>(reference.size());
    r.seed = options.seed;
    r.extractor = extractor.name();
    if (generated.empty()) throw InsufficientSamples("no generated samples to evaluate");

    const Features gen = motion_features(generated, extractor);
    Features text(gen.rows(), extractor.dim());
    std::map<std::string, int> label_of;
    std::vector<int> labels;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        text.row(static_cast<Eigen::Index>(i)) = extractor.text(generated[i].text).transpose();
        labels.push_back(label_of.emplace(generated[i].text, static_cast<int>(label_of.size())).first->second);
    }

    Rng rng(options.seed);
    if (reference.size() >= 2 && generated.size() >= 2) r.fid = fid(gen, motion_features(reference, extractor));
    r.diversity_subset = std::min<int>(options.diversity_subset, static_cast<int>(gen.rows() / 2));
    if (r.diversity_subset >= 1) r.diversity = diversity(gen, r.diversity_subset, rng);

    std::map<int, int> per_label;
    for (int l : labels) ++per_label[l];
    int smallest = static_cast<int>(gen.rows());
    for (const auto& [l, c] : per_label) smallest = std::min(smallest, c);
    r.multimodality_subset = std::min(options.multimodality_subset, smallest / 2);
    if (r.multimodality_subset >= 1) r.multimodality = multimodality(gen, labels, r.multimodality_subset, rng);

    r.mm_dist = mm_dist(text, gen);
    if (gen.rows() >= options.pool_size) r.r_precision = r_precision(text, gen, rng, options.pool_size);
    return r;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j = {{"fid", opt(fid)},
                        {"diversity", opt(diversity)},
                        {"multimodality", opt(multimodality)},
                        {"mm_dist", opt(mm_dist)},
                        {"generated", generated},
                        {"reference", reference},
                        {"diversity_subset", diversity_subset},
                        {"multimodality_subset", multimodality_subset},
                        {"seed", seed},
                        {"extractor", extractor}};
    if (r_precision) {
        j["r_precision"] = {{"top1", (*r_precision)[0]}, {"top2", (*r_precision)[1]}, {"top3", (*r_precision)[2]}};
    } else {
        j["r_precision"] = nullptr;
    }
    return j;
}

}  // namespace duo::metrics
