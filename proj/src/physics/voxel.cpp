#include "duo/physics/voxel.h"

#include <algorithm>
#include <cmath>

#include "duo/error.h"
#include "duo/motion/body.h"

namespace duo::physics {

namespace {

constexpr int kBits = 21;
constexpr std::int64_t kBias = std::int64_t{1} << (kBits - 1);
constexpr std::int64_t kMask = (std::int64_t{1} << kBits) - 1;

void check_grid(const GridParams& g) {
    if (!(g.resolution > 0.0) || !std::isfinite(g.resolution) || !g.origin.allFinite()) {
        throw InvalidArgument("voxel grid needs a finite positive resolution and finite origin");
    }
}

int lower_index(double x, const GridParams& g, int axis) {
    return static_cast<int>(std::ceil((x - g.origin[axis]) / g.resolution - 1e-9));
}

int upper_index(double x, const GridParams& g, int axis) {
    return static_cast<int>(std::floor((x - g.origin[axis]) / g.resolution + 1e-9));
}

}  // namespace

BodyVolume BodyVolume::from_skeleton(const motion::SkeletonSpec& skeleton) {
    BodyVolume body;
    const auto radii = motion::bone_radii(skeleton);
    for (int j = 1; j < skeleton.joint_count(); ++j) body.capsules.push_back({skeleton.parents[j], j, radii[j]});
    return body;
}

void BodyVolume::validate(int joint_count) const {
    for (const auto& c : capsules) {
        if (!(c.radius > 0.0) || !std::isfinite(c.radius)) throw InvalidArgument("capsule radius must be positive");
        if (c.joint_a < 0 || c.joint_b < 0 || c.joint_a >= joint_count || c.joint_b >= joint_count) {
            throw InvalidArgument("capsule joint out of range");
        }
    }
}

std::vector<Segment> BodyVolume::realize(const motion::JointArray& positions, int frame) const {
    if (frame < 0 || frame >= positions.rows()) throw ShapeMismatch("frame out of range");
    const int joints = static_cast<int>(positions.cols() / 3);
    validate(joints);
    std::vector<Segment> out;
    out.reserve(capsules.size());
    for (const auto& c : capsules) {
        Segment s{motion::joint_at(positions, frame, c.joint_a), motion::joint_at(positions, frame, c.joint_b),
                  c.radius};
        if (!s.a.allFinite() || !s.b.allFinite()) throw InvalidArgument("capsule endpoint is not finite");
        out.push_back(s);
    }
    return out;
}

std::int64_t VoxelGrid::pack(const VoxelIndex& idx) {
    std::int64_t key = 0;
    for (int axis = 0; axis < 3; ++axis) {
        const std::int64_t v = idx[axis] + kBias;
        if (v < 0 || v > kMask) throw InvalidArgument("voxel index outside the packable range");
        key = (key << kBits) | v;
    }
    return key;
}

VoxelIndex VoxelGrid::unpack(std::int64_t key) {
    VoxelIndex idx;
    for (int axis = 2; axis >= 0; --axis) {
        idx[axis] = static_cast<int>((key & kMask) - kBias);
        key >>= kBits;
    }
    return idx;
}

VoxelGrid VoxelGrid::from_keys(GridParams params, std::vector<std::int64_t> keys) {
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    VoxelGrid g(std::move(params));
    g.keys_ = std::move(keys);
    return g;
}

VoxelGrid VoxelGrid::from_indices(GridParams params, std::span<const VoxelIndex> indices) {
    std::vector<std::int64_t> keys;
    keys.reserve(indices.size());
    for (const auto& idx : indices) keys.push_back(pack(idx));
    return from_keys(std::move(params), std::move(keys));
}

bool VoxelGrid::contains(const VoxelIndex& idx) const {
    return std::binary_search(keys_.begin(), keys_.end(), pack(idx));
}

std::vector<VoxelIndex> VoxelGrid::indices() const {
    std::vector<VoxelIndex> out;
    out.reserve(keys_.size());
    for (auto k : keys_) out.push_back(unpack(k));
    return out;
}

double point_segment_distance_sq(const Eigen::Vector3d& p, const Segment& s) {
    const Eigen::Vector3d d = s.b - s.a;
    const double len2 = d.squaredNorm();
    double t = len2 > 0.0 ? (p - s.a).dot(d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (s.a + t * d)).squaredNorm();
}

VoxelGrid voxelize(std::span<const Segment> segments, const GridParams& grid) {
    check_grid(grid);
    std::vector<std::int64_t> keys;
    for (const auto& s : segments) {
        const Eigen::Vector3d lo = s.a.cwiseMin(s.b).array() - s.radius;
        const Eigen::Vector3d hi = s.a.cwiseMax(s.b).array() + s.radius;
        const double r2 = s.radius * s.radius + kMembershipSlack;
        const int i0 = lower_index(lo.x(), grid, 0), i1 = upper_index(hi.x(), grid, 0);
        const int j0 = lower_index(lo.y(), grid, 1), j1 = upper_index(hi.y(), grid, 1);
        const int k0 = lower_index(lo.z(), grid, 2), k1 = upper_index(hi.z(), grid, 2);
        for (int i = i0; i <= i1; ++i) {
            for (int j = j0; j <= j1; ++j) {
                for (int k = k0; k <= k1; ++k) {
                    const Eigen::Vector3d c = grid.origin + grid.resolution * Eigen::Vector3d(i, j, k);
                    if (point_segment_distance_sq(c, s) <= r2) keys.push_back(VoxelGrid::pack({i, j, k}));
                }
            }
        }
    }
    return VoxelGrid::from_keys(grid, std::move(keys));
}

VoxelGrid voxelize(const BodyVolume& body, const motion::JointArray& positions, int frame, const GridParams& grid) {
    const auto segs = body.realize(positions, frame);
    return voxelize(std::span<const Segment>(segs), grid);
}

std::int64_t voxel_overlap(const VoxelGrid& a, const VoxelGrid& b) {
    if (!(a.params() == b.params())) throw LatticeMismatch("voxel grids use different lattices");
    const auto& ka = a.keys();
    const auto& kb = b.keys();
    std::int64_t n = 0;
    std::size_t i = 0, j = 0;
    while (i < ka.size() && j < kb.size()) {
        if (ka[i] < kb[j]) {
            ++i;
        } else if (kb[j] < ka[i]) {
            ++j;
        } else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

VoxelGrid dilate(const VoxelGrid& grid, int voxels) {
    if (voxels < 0) throw InvalidArgument("dilation must be non-negative");
    VoxelGrid cur = grid;
    static constexpr int kSteps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int it = 0; it < voxels; ++it) {
        std::vector<std::int64_t> keys = cur.keys();
        keys.reserve(keys.size() * 7);
        for (auto k : cur.keys()) {
            const auto idx = VoxelGrid::unpack(k);
            for (const auto& s : kSteps) keys.push_back(VoxelGrid::pack({idx[0] + s[0], idx[1] + s[1], idx[2] + s[2]}));
        }
        cur = VoxelGrid::from_keys(grid.params(), std::move(keys));
    }
    return cur;
}

std::int64_t brute_force_overlap_oracle(std::span<const Segment> a, std::span<const Segment> b,
                                        const GridParams& grid) {
    check_grid(grid);
    if (a.empty() || b.empty()) return 0;
    auto bounds = [](std::span<const Segment> segs) {
        Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300), hi = Eigen::Vector3d::Constant(-1e300);
        for (const auto& s : segs) {
            for (int axis = 0; axis < 3; ++axis) {
                lo[axis] = std::min({lo[axis], s.a[axis] - s.radius, s.b[axis] - s.radius});
                hi[axis] = std::max({hi[axis], s.a[axis] + s.radius, s.b[axis] + s.radius});
            }
        }
        return std::pair{lo, hi};
    };
    // Closest point by projection written out per component, separate from
    // point_segment_distance_sq.
    auto inside = [](double x, double y, double z, std::span<const Segment> segs) {
        for (const auto& s : segs) {
            const double dx = s.b.x() - s.a.x(), dy = s.b.y() - s.a.y(), dz = s.b.z() - s.a.z();
            const double px = x - s.a.x(), py = y - s.a.y(), pz = z - s.a.z();
            const double len2 = dx * dx + dy * dy + dz * dz;
            double t = 0.0;
            if (len2 > 0.0) t = (px * dx + py * dy + pz * dz) / len2;
            if (t < 0.0) t = 0.0;
            if (t > 1.0) t = 1.0;
            const double ex = px - t * dx, ey = py - t * dy, ez = pz - t * dz;
            if (ex * ex + ey * ey + ez * ez <= s.radius * s.radius + kMembershipSlack) return true;
        }
        return false;
    };
    const auto [alo, ahi] = bounds(a);
    const auto [blo, bhi] = bounds(b);
    const Eigen::Vector3d lo = alo.cwiseMax(blo);
    const Eigen::Vector3d hi = ahi.cwiseMin(bhi);
    if ((lo.array() > hi.array()).any()) return 0;
    std::array<long, 3> first{}, last{};
    for (int axis = 0; axis < 3; ++axis) {
        first[axis] = std::lround(std::floor((lo[axis] - grid.origin[axis]) / grid.resolution)) - 1;
        last[axis] = std::lround(std::ceil((hi[axis] - grid.origin[axis]) / grid.resolution)) + 1;
    }
    std::int64_t count = 0;
    for (long i = first[0]; i <= last[0]; ++i) {
        const double x = grid.origin.x() + grid.resolution * static_cast<double>(i);
        for (long j = first[1]; j <= last[1]; ++j) {
            const double y = grid.origin.y() + grid.resolution * static_cast<double>(j);
            for (long k = first[2]; k <= last[2]; ++k) {
                const double z = grid.origin.z() + grid.resolution * static_cast<double>(k);
                if (inside(x, y, z, a) && inside(x, y, z, b)) ++count;
            }
        }
    }
    return count;
}

}  // namespace duo::physics
