#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "duo/metrics/extractor.h"
#include "duo/metrics/fidelity.h"
#include "duo/motion/sequence.h"

namespace duo::metrics {

struct FidelityOptions {
    int diversity_subset = 300;
    int multimodality_subset = 10;
    int pool_size = 32;
    std::uint64_t seed = 0;
};

/// Metrics that cannot be computed for the given sample sizes stay unset.
struct EvalReport {
    std::optional<double> fid;
    std::optional<double> diversity;
    std::optional<double> multimodality;
    std::optional<double> mm_dist;
    std::optional<std::array<double, 3>> r_precision;
    int generated = 0;
    int reference = 0;
    int diversity_subset = 0;
    int multimodality_subset = 0;
    std::uint64_t seed = 0;
    std::string extractor;

    nlohmann::json to_json() const;
};

/// Subset sizes are clamped to what the sample counts allow; captions group
/// samples for multimodality.
EvalReport evaluate_fidelity(const motion::Dataset& generated, const motion::Dataset& reference,
                             const FeatureExtractor& extractor, const FidelityOptions& options);

}  // namespace duo::metrics
