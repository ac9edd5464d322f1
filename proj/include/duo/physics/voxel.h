#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "duo/motion/kinematics.h"
#include "duo/motion/skeleton.h"

namespace duo::physics {

struct Capsule {
    int joint_a = 0;
    int joint_b = 0;
    double radius = 0.0;
};

/// Realized capsule: a segment in world space plus a radius.
struct Segment {
    Eigen::Vector3d a = Eigen::Vector3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    double radius = 0.0;
};

struct BodyVolume {
    std::vector<Capsule> capsules;

    /// One capsule per bone (parent -> child) with motion::bone_radius radii.
    static BodyVolume from_skeleton(const motion::SkeletonSpec& skeleton);

    /// Throws InvalidArgument for non-positive radii or out-of-range joints.
    void validate(int joint_count) const;

    /// Segments for one frame of an N x 3J joint array. Throws ShapeMismatch
    /// or InvalidArgument for non-finite endpoints.
    std::vector<Segment> realize(const motion::JointArray& positions, int frame) const;
};

struct GridParams {
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    double resolution = 0.02;

    friend bool operator==(const GridParams&, const GridParams&) = default;
};

/// Squared-distance slack for the center-in-capsule test, so lattice points
/// lying exactly on a surface or segment count despite rounding.
inline constexpr double kMembershipSlack = 1e-12;

using VoxelIndex = std::array<int, 3>;

/// Sparse occupancy on the lattice origin + resolution * index. Indices are
/// packed into sorted, unique 64-bit keys (21 bits per axis).
class VoxelGrid {
public:
    VoxelGrid() = default;
    explicit VoxelGrid(GridParams params) : params_(std::move(params)) {}

    static VoxelGrid from_indices(GridParams params, std::span<const VoxelIndex> indices);

    const GridParams& params() const { return params_; }
    std::size_t size() const { return keys_.size(); }
    bool empty() const { return keys_.empty(); }
    bool contains(const VoxelIndex& idx) const;
    std::vector<VoxelIndex> indices() const;
    const std::vector<std::int64_t>& keys() const { return keys_; }

    static std::int64_t pack(const VoxelIndex& idx);
    static VoxelIndex unpack(std::int64_t key);
    /// Sorts and deduplicates raw packed keys.
    static VoxelGrid from_keys(GridParams params, std::vector<std::int64_t> keys);

private:
    GridParams params_;
    std::vector<std::int64_t> keys_;
};

double point_segment_distance_sq(const Eigen::Vector3d& p, const Segment& s);

/// A voxel is occupied iff its center lies within some segment's radius.
VoxelGrid voxelize(std::span<const Segment> segments, const GridParams& grid);
VoxelGrid voxelize(const BodyVolume& body, const motion::JointArray& positions, int frame, const GridParams& grid);

/// |a ∩ b|. Throws LatticeMismatch unless both grids share origin and resolution.
std::int64_t voxel_overlap(const VoxelGrid& a, const VoxelGrid& b);

/// Iterated 6-neighborhood dilation.
VoxelGrid dilate(const VoxelGrid& grid, int voxels);

/// Independent check of voxel_overlap(voxelize(a), voxelize(b)): scans every
/// lattice point in the intersection of the two bounding boxes.
std::int64_t brute_force_overlap_oracle(std::span<const Segment> a, std::span<const Segment> b,
                                        const GridParams& grid);

}  // namespace duo::physics
