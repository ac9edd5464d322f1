#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "duo/motion/rotation.h"
#include "duo/motion/sequence.h"
#include "duo/motion/skeleton.h"

namespace duo::motion {

/// frames x (3 * joints); joint j of frame f lives in columns [3j, 3j+3).
using JointArray = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Vector3d joint_at(const JointArray& a, Eigen::Index frame, int joint) {
    return a.row(frame).segment<3>(3 * joint).transpose();
}

/// Global joint positions for one pose. Rotations are local (relative to the
/// parent); the root's rotation is its global orientation.
std::vector<Eigen::Vector3d> forward_kinematics(const SkeletonSpec& skeleton, const Eigen::Vector3d& root_translation,
                                                std::span<const Rotation6D> rotations);

std::vector<Eigen::Vector3d> forward_kinematics(const SkeletonSpec& skeleton, const Eigen::Vector3d& root_translation,
                                                std::span<const Eigen::Matrix3d> rotations);

/// Stored positions for kIH, forward kinematics for kIX.
JointArray joint_positions(const MotionSequence& seq, const SkeletonSpec& skeleton);

/// Frame rate assumed by velocity channels.
inline constexpr double kFramesPerSecond = 20.0;

/// Builds a layout-conformant sequence from per-frame root translations and
/// local joint rotations (frames x joints). Velocities are finite differences
/// at kFramesPerSecond; foot contacts are derived from foot height and speed.
MotionSequence compose_sequence(const MotionLayout& layout, const SkeletonSpec& skeleton,
                                const std::vector<Eigen::Vector3d>& root_translation,
                                const std::vector<std::vector<Eigen::Matrix3d>>& local_rotations);

/// Shifts the body by (dx, 0, dz): position channels (kIH) or the root
/// translation (kIX). Velocities, rotations and contacts are unchanged.
MotionSequence translate_ground(const MotionSequence& seq, const Eigen::Vector2d& delta);

}  // namespace duo::motion
