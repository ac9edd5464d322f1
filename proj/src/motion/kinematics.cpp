#include "duo/motion/kinematics.h"

#include "duo/error.h"

namespace duo::motion {

namespace {

constexpr double kFootHeight = 0.10;
constexpr double kFootSpeed = 0.60;

void check_layout(const MotionLayout& layout, const SkeletonSpec& skeleton) {
    if (layout.joints != skeleton.joint_count()) {
        throw ShapeMismatch("layout has " + std::to_string(layout.joints) + " joints, skeleton has " +
                            std::to_string(skeleton.joint_count()));
    }
}

}  // namespace

std::vector<Eigen::Vector3d> forward_kinematics(const SkeletonSpec& skeleton, const Eigen::Vector3d& root_translation,
                                                std::span<const Eigen::Matrix3d> rotations) {
    const int n = skeleton.joint_count();
    if (static_cast<int>(rotations.size()) != n) {
        throw ShapeMismatch("forward_kinematics: " + std::to_string(rotations.size()) + " rotations for " +
                            std::to_string(n) + " joints");
    }
    std::vector<Eigen::Matrix3d> global(n);
    std::vector<Eigen::Vector3d> pos(n);
    global[0] = rotations[0];
    pos[0] = root_translation;
    for (int j = 1; j < n; ++j) {
        const int p = skeleton.parents[j];
        global[j] = global[p] * rotations[j];
        pos[j] = pos[p] + global[p] * skeleton.rest_offsets[j];
    }
    return pos;
}

std::vector<Eigen::Vector3d> forward_kinematics(const SkeletonSpec& skeleton, const Eigen::Vector3d& root_translation,
                                                std::span<const Rotation6D> rotations) {
    std::vector<Eigen::Matrix3d> mats;
    mats.reserve(rotations.size());
    for (const auto& r : rotations) mats.push_back(rot6d_to_matrix(r));
    return forward_kinematics(skeleton, root_translation, std::span<const Eigen::Matrix3d>(mats));
}

JointArray joint_positions(const MotionSequence& seq, const SkeletonSpec& skeleton) {
    check_layout(seq.layout, skeleton);
    const int n = seq.frames();
    const int J = skeleton.joint_count();
    JointArray out(n, 3 * J);
    if (seq.layout.kind == LayoutKind::kIH) {
        out = seq.data.leftCols(3 * J).cast<double>();
        return out;
    }
    std::vector<Rotation6D> rots(J);
    for (int f = 0; f < n; ++f) {
        const auto row = seq.data.row(f);
        const Eigen::Vector3d root = row.segment<3>(0).transpose().cast<double>();
        for (int j = 0; j < J; ++j) {
            rots[j] = Rotation6D(row.segment<6>(6 + 6 * j).transpose().cast<double>());
        }
        const auto pos = forward_kinematics(skeleton, root, std::span<const Rotation6D>(rots));
        for (int j = 0; j < J; ++j) out.row(f).segment<3>(3 * j) = pos[j].transpose();
    }
    return out;
}

MotionSequence compose_sequence(const MotionLayout& layout, const SkeletonSpec& skeleton,
                                const std::vector<Eigen::Vector3d>& root_translation,
                                const std::vector<std::vector<Eigen::Matrix3d>>& local_rotations) {
    check_layout(layout, skeleton);
    const int n = static_cast<int>(root_translation.size());
    const int J = skeleton.joint_count();
    if (n < 1 || static_cast<int>(local_rotations.size()) != n) {
        throw ShapeMismatch("compose_sequence: frame counts disagree");
    }

    JointArray pos(n, 3 * J);
    for (int f = 0; f < n; ++f) {
        const auto p = forward_kinematics(skeleton, root_translation[f], std::span<const Eigen::Matrix3d>(local_rotations[f]));
        for (int j = 0; j < J; ++j) pos.row(f).segment<3>(3 * j) = p[j].transpose();
    }
    // Forward difference on the first frame, backward elsewhere.
    JointArray vel(n, 3 * J);
    for (int f = 0; f < n; ++f) {
        if (n == 1) {
            vel.row(f).setZero();
        } else if (f == 0) {
            vel.row(f) = (pos.row(1) - pos.row(0)) * kFramesPerSecond;
        } else {
            vel.row(f) = (pos.row(f) - pos.row(f - 1)) * kFramesPerSecond;
        }
    }

    FrameMatrix data(n, layout.dim());
    data.setZero();
    for (int f = 0; f < n; ++f) {
        if (layout.kind == LayoutKind::kIH) {
            data.row(f).segment(0, 3 * J) = pos.row(f).cast<float>();
            data.row(f).segment(3 * J, 3 * J) = vel.row(f).cast<float>();
            for (int j = 1; j < J; ++j) {
                const auto r6 = matrix_to_rot6d(local_rotations[f][j]);
                data.row(f).segment<6>(layout.rotation_offset() + 6 * (j - 1)) = r6.values.transpose().cast<float>();
            }
            for (int k = 0; k < 4; ++k) {
                const int foot = skeleton.foot_joints[k];
                const double height = pos(f, 3 * foot + 1);
                const double speed = vel.row(f).segment<3>(3 * foot).norm();
                data(f, layout.contact_offset() + k) = (height < kFootHeight && speed < kFootSpeed) ? 1.0f : 0.0f;
            }
        } else {
            data.row(f).segment<3>(0) = root_translation[f].transpose().cast<float>();
            data.row(f).segment<3>(3) = vel.row(f).segment<3>(0).cast<float>();
            for (int j = 0; j < J; ++j) {
                const auto r6 = matrix_to_rot6d(local_rotations[f][j]);
                data.row(f).segment<6>(6 + 6 * j) = r6.values.transpose().cast<float>();
            }
        }
    }
    return MotionSequence(layout, std::move(data));
}

MotionSequence translate_ground(const MotionSequence& seq, const Eigen::Vector2d& delta) {
    MotionSequence out = seq;
    const int joints = seq.layout.kind == LayoutKind::kIH ? seq.layout.joints : 1;
    for (int f = 0; f < out.frames(); ++f) {
        for (int j = 0; j < joints; ++j) {
            out.data(f, 3 * j) = static_cast<float>(static_cast<double>(seq.data(f, 3 * j)) + delta.x());
            out.data(f, 3 * j + 2) = static_cast<float>(static_cast<double>(seq.data(f, 3 * j + 2)) + delta.y());
        }
    }
    return out;
}

}  // namespace duo::motion
