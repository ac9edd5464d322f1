#include "duo/physics/penetration.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "duo/error.h"
#include "duo/motion/kinematics.h"

namespace duo::physics {

std::int64_t severe_threshold_voxels(double volume_ml, double resolution) {
    if (!(resolution > 0.0)) throw InvalidArgument("resolution must be positive");
    const double voxel_ml = resolution * resolution * resolution * 1e6;
    return static_cast<std::int64_t>(std::floor(volume_ml / voxel_ml + 1e-9));
}

double SequenceDetail::mean_overlap() const {
    if (overlap.empty()) return 0.0;
    return static_cast<double>(std::accumulate(overlap.begin(), overlap.end(), std::int64_t{0})) /
           static_cast<double>(overlap.size());
}

std::int64_t SequenceDetail::max_overlap() const {
    return overlap.empty() ? 0 : *std::max_element(overlap.begin(), overlap.end());
}

std::int64_t SequenceDetail::max_dilated_overlap() const {
    return dilated_overlap.empty() ? 0 : *std::max_element(dilated_overlap.begin(), dilated_overlap.end());
}

int SequenceDetail::penetrating_frames() const {
    return static_cast<int>(std::count_if(overlap.begin(), overlap.end(), [](std::int64_t v) { return v > 0; }));
}

bool SequenceDetail::valid_contact(std::int64_t severe_threshold) const {
    return max_dilated_overlap() > 0 && max_overlap() <= severe_threshold;
}

SequenceDetail analyze_pair(const motion::InteractionPair& pair, const motion::SkeletonSpec& skeleton,
                            const BodyVolume& body, const PhysicsConfig& config) {
    const auto pa = motion::joint_positions(pair.person_a, skeleton);
    const auto pb = motion::joint_positions(pair.person_b, skeleton);
    SequenceDetail d;
    d.contact_annotated = pair.contact_annotated;
    for (int f = 0; f < pair.frames(); ++f) {
        const auto va = voxelize(body, pa, f, config.grid);
        const auto vb = voxelize(body, pb, f, config.grid);
        d.overlap.push_back(voxel_overlap(va, vb));
        d.dilated_overlap.push_back(
            voxel_overlap(dilate(va, config.dilation_voxels), dilate(vb, config.dilation_voxels)));
    }
    return d;
}

bool any_overlap(const motion::InteractionPair& pair, const motion::SkeletonSpec& skeleton, const BodyVolume& body,
                 const GridParams& grid) {
    const auto pa = motion::joint_positions(pair.person_a, skeleton);
    const auto pb = motion::joint_positions(pair.person_b, skeleton);
    for (int f = 0; f < pair.frames(); ++f) {
        if (voxel_overlap(voxelize(body, pa, f, grid), voxelize(body, pb, f, grid)) > 0) return true;
    }
    return false;
}

PenetrationMetrics penetration_metrics(const std::vector<SequenceDetail>& details) {
    if (details.empty()) throw InsufficientSamples("penetration metrics need at least one sequence");
    PenetrationMetrics m;
    double pooled = 0.0;
    double frames = 0.0;
    for (const auto& d : details) {
        m.pv += d.mean_overlap();
        m.pfr += d.penetrating_frames() > 0 ? 1.0 : 0.0;
        m.pdr += d.frames() > 0 ? static_cast<double>(d.penetrating_frames()) / d.frames() : 0.0;
        pooled += d.mean_overlap() * d.frames();
        frames += d.frames();
    }
    const auto n = static_cast<double>(details.size());
    m.pv /= n;
    m.pfr /= n;
    m.pdr /= n;
    m.pv_pooled = frames > 0 ? pooled / frames : 0.0;
    return m;
}

PenetrationMetrics penetration_metrics(const motion::Dataset& pairs, const motion::SkeletonSpec& skeleton,
                                       const BodyVolume& body, const GridParams& grid) {
    PhysicsConfig cfg;
    cfg.grid = grid;
    cfg.dilation_voxels = 0;
    std::vector<SequenceDetail> details;
    for (const auto& p : pairs) details.push_back(analyze_pair(p, skeleton, body, cfg));
    return penetration_metrics(details);
}

double contact_ratio(const std::vector<SequenceDetail>& details, std::int64_t severe_threshold) {
    int annotated = 0;
    int valid = 0;
    for (const auto& d : details) {
        if (!d.contact_annotated) continue;
        ++annotated;
        valid += d.valid_contact(severe_threshold) ? 1 : 0;
    }
    if (annotated == 0) throw InsufficientSamples("contact ratio needs at least one annotated sequence");
    return static_cast<double>(valid) / annotated;
}

double contact_ratio(const motion::Dataset& pairs, const motion::SkeletonSpec& skeleton, const BodyVolume& body,
                     const PhysicsConfig& config) {
    std::vector<SequenceDetail> details;
    for (const auto& p : pairs) {
        if (p.contact_annotated) details.push_back(analyze_pair(p, skeleton, body, config));
    }
    return contact_ratio(details, config.severe_threshold);
}

PenetrationReport evaluate_physics(const motion::Dataset& pairs, const motion::SkeletonSpec& skeleton,
                                   const BodyVolume& body, const PhysicsConfig& config, bool treat_all_as_annotated) {
    PenetrationReport r;
    r.config = config;
    for (const auto& p : pairs) {
        r.details.push_back(analyze_pair(p, skeleton, body, config));
        if (treat_all_as_annotated) r.details.back().contact_annotated = true;
    }
    r.metrics = penetration_metrics(r.details);
    for (const auto& d : r.details) r.annotated += d.contact_annotated ? 1 : 0;
    if (r.annotated > 0) r.contact_ratio = contact_ratio(r.details, config.severe_threshold);
    return r;
}

nlohmann::json PenetrationReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < details.size(); ++i) {
        const auto& d = details[i];
        rows.push_back({{"index", i},
                        {"frames", d.frames()},
                        {"mean_overlap", d.mean_overlap()},
                        {"max_overlap", d.max_overlap()},
                        {"max_dilated_overlap", d.max_dilated_overlap()},
                        {"penetrating_frames", d.penetrating_frames()},
                        {"contact_annotated", d.contact_annotated},
                        {"valid_contact", d.valid_contact(config.severe_threshold)},
                        {"overlap", d.overlap}});
    }
    nlohmann::json j = {{"pv", metrics.pv},
                        {"pfr", metrics.pfr},
                        {"pdr", metrics.pdr},
                        {"pv_pooled", metrics.pv_pooled},
                        {"annotated", annotated},
                        {"resolution", config.grid.resolution},
                        {"dilation_voxels", config.dilation_voxels},
                        {"severe_threshold_voxels", config.severe_threshold},
                        {"sequences", rows}};
    j["contact_ratio"] = contact_ratio ? nlohmann::json(*contact_ratio) : nlohmann::json(nullptr);
    return j;
}

}  // namespace duo::physics
