#include "duo/motion/body.h"

#include <algorithm>
#include <unordered_map>

namespace duo::motion {

double bone_radius(const std::string& name) {
    static const std::unordered_map<std::string, double> table = {
        // toy
        {"chest", 0.13}, {"head", 0.10}, {"left_shoulder", 0.06}, {"right_shoulder", 0.06},
        {"left_wrist", 0.045}, {"right_wrist", 0.045}, {"left_hip", 0.08}, {"right_hip", 0.08},
        {"left_foot", 0.06}, {"right_foot", 0.06},
        // smpl body
        {"spine1", 0.12}, {"spine2", 0.12}, {"spine3", 0.12}, {"neck", 0.06},
        {"left_collar", 0.06}, {"right_collar", 0.06}, {"left_elbow", 0.05}, {"right_elbow", 0.05},
        {"left_knee", 0.07}, {"right_knee", 0.07}, {"left_ankle", 0.05}, {"right_ankle", 0.05},
        // face
        {"jaw", 0.03}, {"left_eye", 0.01}, {"right_eye", 0.01},
    };
    if (auto it = table.find(name); it != table.end()) return it->second;
    for (const char* finger : {"index", "middle", "pinky", "ring", "thumb"}) {
        if (name.find(finger) != std::string::npos) return 0.01;
    }
    return kDefaultBoneRadius;
}

std::vector<double> bone_radii(const SkeletonSpec& skeleton) {
    std::vector<double> r(skeleton.joint_count(), 0.0);
    for (int j = 1; j < skeleton.joint_count(); ++j) r[j] = bone_radius(skeleton.names[j]);
    return r;
}

std::vector<Eigen::Vector3d> rest_positions(const SkeletonSpec& skeleton) {
    std::vector<Eigen::Vector3d> pos(skeleton.joint_count(), Eigen::Vector3d::Zero());
    for (int j = 1; j < skeleton.joint_count(); ++j) pos[j] = pos[skeleton.parents[j]] + skeleton.rest_offsets[j];
    return pos;
}

double standing_height(const SkeletonSpec& skeleton) {
    double lowest = 0.0;
    for (const auto& p : rest_positions(skeleton)) lowest = std::min(lowest, p.y());
    return -lowest;
}

}  // namespace duo::motion
