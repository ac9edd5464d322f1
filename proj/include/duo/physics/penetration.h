#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "duo/motion/sequence.h"
#include "duo/motion/skeleton.h"
#include "duo/physics/voxel.h"

namespace duo::physics {

/// Voxel count equivalent to a volume in milliliters (216 ml at 2 cm -> 27).
std::int64_t severe_threshold_voxels(double volume_ml, double resolution);

struct PhysicsConfig {
    GridParams grid;
    int dilation_voxels = 1;
    std::int64_t severe_threshold = 27;
};

struct SequenceDetail {
    std::vector<std::int64_t> overlap;          // undilated, per frame
    std::vector<std::int64_t> dilated_overlap;  // per frame
    bool contact_annotated = false;

    int frames() const { return static_cast<int>(overlap.size()); }
    double mean_overlap() const;
    std::int64_t max_overlap() const;
    std::int64_t max_dilated_overlap() const;
    int penetrating_frames() const;
    /// Touching within the dilation shell without severe interpenetration.
    bool valid_contact(std::int64_t severe_threshold) const;
};

struct PenetrationMetrics {
    double pv = 0.0;         // mean over sequences of per-frame mean overlap
    double pfr = 0.0;        // fraction of sequences with any overlap
    double pdr = 0.0;        // mean fraction of penetrating frames
    double pv_pooled = 0.0;  // mean over all frames pooled
};

struct PenetrationReport {
    PenetrationMetrics metrics;
    /// Unset when no sequence is annotated as contact.
    std::optional<double> contact_ratio;
    int annotated = 0;
    PhysicsConfig config;
    std::vector<SequenceDetail> details;

    nlohmann::json to_json() const;
};

/// Per-frame overlaps of the two persons (undilated and dilated).
SequenceDetail analyze_pair(const motion::InteractionPair& pair, const motion::SkeletonSpec& skeleton,
                            const BodyVolume& body, const PhysicsConfig& config);

/// Any frame with at least one shared voxel (undilated).
bool any_overlap(const motion::InteractionPair& pair, const motion::SkeletonSpec& skeleton, const BodyVolume& body,
                 const GridParams& grid);

/// Throws InsufficientSamples for an empty batch.
PenetrationMetrics penetration_metrics(const std::vector<SequenceDetail>& details);
PenetrationMetrics penetration_metrics(const motion::Dataset& pairs, const motion::SkeletonSpec& skeleton,
                                       const BodyVolume& body, const GridParams& grid);

/// Valid contacts over annotated sequences. Throws InsufficientSamples when
/// nothing is annotated.
double contact_ratio(const std::vector<SequenceDetail>& details, std::int64_t severe_threshold);
double contact_ratio(const motion::Dataset& pairs, const motion::SkeletonSpec& skeleton, const BodyVolume& body,
                     const PhysicsConfig& config);

/// Full report. With treat_all_as_annotated every sequence enters the
/// contact ratio regardless of its annotation.
PenetrationReport evaluate_physics(const motion::Dataset& pairs, const motion::SkeletonSpec& skeleton,
                                   const BodyVolume& body, const PhysicsConfig& config,
                                   bool treat_all_as_annotated = false);

}  // namespace duo::physics
