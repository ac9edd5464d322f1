#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

namespace duo::motion {

/// Kinematic tree in rest pose. Joints are topologically ordered, the root
/// is joint 0, y is up and the body faces +z with its left side on +x.
struct SkeletonSpec {
    std::vector<std::string> names;
    std::vector<int> parents;
    std::vector<Eigen::Vector3d> rest_offsets;
    /// Joints feeding the four foot-contact flags (left heel/toe, right heel/toe).
    std::array<int, 4> foot_joints{0, 0, 0, 0};

    SkeletonSpec() = default;
    SkeletonSpec(std::vector<std::string> names, std::vector<int> parents,
                 std::vector<Eigen::Vector3d> offsets);

    int joint_count() const { return static_cast<int>(parents.size()); }

    /// Throws InvalidArgument on cycles, multiple roots, bad parent order or
    /// non-finite offsets.
    void validate() const;

    std::optional<int> find(const std::string& name) const;
    int require(const std::string& name) const;

    /// Stable 64-bit FNV-1a digest of the topology and offsets, hex encoded.
    std::string hash() const;

    nlohmann::json to_json() const;
    static SkeletonSpec from_json(const nlohmann::json& j);

    /// 11-joint stick figure used by the toy configuration.
    static SkeletonSpec toy();
    /// 22-joint SMPL body (positional layouts at 262 channels).
    static SkeletonSpec smpl22();
    /// 55-joint SMPL-X body with hands, jaw and eyes.
    static SkeletonSpec smplx55();
    /// Resolves "toy", "smpl22" or "smplx55"; anything else is read as a JSON file path.
    static SkeletonSpec by_name(const std::string& name_or_path);
};

bool operator==(const SkeletonSpec& a, const SkeletonSpec& b);

}  // namespace duo::motion
