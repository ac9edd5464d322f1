#pragma once

#include <string>
#include <vector>

#include "duo/motion/skeleton.h"

namespace duo::motion {

/// Capsule radius in meters for the bone ending at a joint of this name.
/// Unknown names get kDefaultBoneRadius.
double bone_radius(const std::string& child_joint_name);

inline constexpr double kDefaultBoneRadius = 0.03;

/// bone_radius for every joint; entry 0 (the root, which has no bone) is 0.
std::vector<double> bone_radii(const SkeletonSpec& skeleton);

/// Rest-pose global joint positions with the root at the origin.
std::vector<Eigen::Vector3d> rest_positions(const SkeletonSpec& skeleton);

/// Root height that puts the lowest rest-pose joint on the ground.
double standing_height(const SkeletonSpec& skeleton);

}  // namespace duo::motion
