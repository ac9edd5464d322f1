#include <cmath>

#include "doctest.h"
#include "duo/error.h"
#include "duo/motion/synth.h"
#include "duo/physics/penetration.h"
#include "duo/physics/voxel.h"
#include "duo/util/random.h"

using namespace duo;
using namespace duo::physics;

namespace {

std::vector<Segment> random_body(Rng& rng, const Eigen::Vector3d& center, int count) {
    std::vector<Segment> out;
    for (int i = 0; i < count; ++i) {
        Segment s;
        s.a = center + Eigen::Vector3d(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
        s.b = s.a + Eigen::Vector3d(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
        s.radius = rng.uniform(0.01, 0.1);
        out.push_back(s);
    }
    return out;
}

VoxelGrid cube(int offset_x) {
    std::vector<VoxelIndex> idx;
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 50; ++j)
            for (int k = 0; k < 50; ++k) idx.push_back({i + offset_x, j, k});
    return VoxelGrid::from_indices(GridParams{}, idx);
}

motion::InteractionPair static_pair(const motion::SkeletonSpec& sk, double separation) {
    const motion::MotionLayout layout{motion::LayoutKind::kIH, sk.joint_count()};
    std::vector<std::vector<Eigen::Matrix3d>> rots(3, std::vector<Eigen::Matrix3d>(sk.joint_count(),
                                                                                    Eigen::Matrix3d::Identity()));
    std::vector<Eigen::Vector3d> ra(3, Eigen::Vector3d(0, 0.9, 0));
    std::vector<Eigen::Vector3d> rb(3, Eigen::Vector3d(0, 0.9, separation));
    motion::InteractionPair p;
    p.person_a = motion::compose_sequence(layout, sk, ra, rots);
    p.person_b = motion::compose_sequence(layout, sk, rb, rots);
    p.contact_annotated = true;
    return p;
}

}  // namespace

TEST_CASE("zero-radius axis-aligned segment covers 51 lattice points") {
    const Segment s{Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0), 0.0};
    CHECK(voxelize(std::span<const Segment>(&s, 1), GridParams{}).size() == 51);
}

TEST_CASE("sphere voxelization matches an exhaustive center-in-sphere scan") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Vector3d c(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const Segment s{c, c, 0.05};
        const auto g = voxelize(std::span<const Segment>(&s, 1), GridParams{});
        std::int64_t count = 0;
        for (int i = -60; i <= 60; ++i)
            for (int j = -60; j <= 60; ++j)
                for (int k = -60; k <= 60; ++k) {
                    const double dx = 0.02 * i - c.x(), dy = 0.02 * j - c.y(), dz = 0.02 * k - c.z();
                    if (dx * dx + dy * dy + dz * dz <= 0.05 * 0.05 + kMembershipSlack) {
                        ++count;
                        CHECK(g.contains({i, j, k}));
                    }
                }
        CHECK(static_cast<std::int64_t>(g.size()) == count);
    }
}

TEST_CASE("translation by one pitch shifts every index by one") {
    Rng rng(3);
    auto body = random_body(rng, Eigen::Vector3d(0.013, 0.4, -0.2), 4);
    const auto g0 = voxelize(std::span<const Segment>(body), GridParams{});
    for (auto& s : body) {
        s.a.y() += 0.02;
        s.b.y() += 0.02;
    }
    const auto g1 = voxelize(std::span<const Segment>(body), GridParams{});
    REQUIRE(g0.size() == g1.size());
    const auto i0 = g0.indices();
    for (const auto& idx : i0) CHECK(g1.contains({idx[0], idx[1] + 1, idx[2]}));
}

TEST_CASE("voxel_overlap examples") {
    const auto a = cube(0);
    CHECK(voxel_overlap(a, a) == 125000);
    CHECK(voxel_overlap(a, cube(25)) == 62500);
    CHECK(voxel_overlap(a, cube(50)) == 0);
    VoxelGrid other(GridParams{Eigen::Vector3d::Zero(), 0.01});
    CHECK_THROWS_AS(voxel_overlap(a, other), LatticeMismatch);
}

TEST_CASE("packing round trip including negative indices") {
    for (VoxelIndex idx : {VoxelIndex{0, 0, 0}, VoxelIndex{-1, 2, -3}, VoxelIndex{1000, -1000, 77}}) {
        CHECK(VoxelGrid::unpack(VoxelGrid::pack(idx)) == idx);
    }
}

TEST_CASE("brute-force oracle agrees with voxelize + overlap on 100 random cases") {
    Rng rng(99);
    int discrepancies = 0;
    int nonzero = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_body(rng, Eigen::Vector3d::Zero(), 3);
        const auto b = random_body(rng, Eigen::Vector3d(rng.uniform(-0.3, 0.3), 0, rng.uniform(-0.3, 0.3)), 3);
        const GridParams grid;
        const auto fast = voxel_overlap(voxelize(std::span<const Segment>(a), grid),
                                        voxelize(std::span<const Segment>(b), grid));
        const auto slow = brute_force_overlap_oracle(a, b, grid);
        discrepancies += fast != slow;
        nonzero += fast > 0;
        // Symmetry.
        CHECK(fast == voxel_overlap(voxelize(std::span<const Segment>(b), grid),
                                    voxelize(std::span<const Segment>(a), grid)));
    }
    CHECK(discrepancies == 0);
    CHECK(nonzero > 20);
    CHECK(brute_force_overlap_oracle({}, {}, GridParams{}) == 0);
}

TEST_CASE("property: dilation never decreases overlap") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const auto a = voxelize(random_body(rng, Eigen::Vector3d::Zero(), 2), GridParams{});
        const auto b = voxelize(random_body(rng, Eigen::Vector3d(0.3, 0, 0), 2), GridParams{});
        std::int64_t prev = voxel_overlap(a, b);
        for (int d = 1; d <= 2; ++d) {
            const auto cur = voxel_overlap(dilate(a, d), dilate(b, d));
            CHECK(cur >= prev);
            prev = cur;
        }
    }
    const auto single = VoxelGrid::from_indices(GridParams{}, std::vector<VoxelIndex>{{0, 0, 0}});
    CHECK(dilate(single, 1).size() == 7);
    CHECK(dilate(single, 2).size() == 25);
}

TEST_CASE("severe threshold from volume") {
    CHECK(severe_threshold_voxels(216.0, 0.02) == 27);
    CHECK(severe_threshold_voxels(8.0, 0.02) == 1);
}

TEST_CASE("metric arithmetic from per-frame overlaps") {
    SequenceDetail hit;
    hit.overlap = {0, 3, 3, 0, 1, 0, 2, 0, 0, 1};
    SequenceDetail clean;
    clean.overlap = std::vector<std::int64_t>(10, 0);
    const auto m = penetration_metrics(std::vector<SequenceDetail>{hit, clean});
    CHECK(m.pfr == doctest::Approx(0.5));
    CHECK(m.pdr == doctest::Approx(0.25));
    CHECK(m.pv == doctest::Approx(0.5));
    CHECK_THROWS_AS(penetration_metrics(std::vector<SequenceDetail>{}), InsufficientSamples);

    const auto sep = penetration_metrics(std::vector<SequenceDetail>{clean, clean});
    CHECK(sep.pv == 0.0);
    CHECK(sep.pfr == 0.0);
    CHECK(sep.pdr == 0.0);
}

TEST_CASE("contact ratio: grazing counts, severe excluded, unannotated ignored") {
    const auto sk = motion::SkeletonSpec::toy();
    const auto body = BodyVolume::from_skeleton(sk);
    PhysicsConfig cfg;
    // Torso capsules of radius 0.13 facing each other: 0.27 m apart is a 1 cm gap.
    const auto graze = analyze_pair(static_pair(sk, 0.27), sk, body, cfg);
    CHECK(graze.max_overlap() == 0);
    CHECK(graze.max_dilated_overlap() > 0);
    CHECK(graze.valid_contact(cfg.severe_threshold));

    const auto deep = analyze_pair(static_pair(sk, 0.05), sk, body, cfg);
    CHECK(deep.max_overlap() > 1000);
    CHECK_FALSE(deep.valid_contact(cfg.severe_threshold));

    const auto far = analyze_pair(static_pair(sk, 1.0), sk, body, cfg);
    CHECK(far.max_dilated_overlap() == 0);

    CHECK(contact_ratio(std::vector<SequenceDetail>{graze, deep}, 27) == doctest::Approx(0.5));
    // Raising the severe cutoff can only admit more sequences.
    CHECK(contact_ratio(std::vector<SequenceDetail>{graze, deep}, 1000000) == doctest::Approx(1.0));
    auto unannotated = deep;
    unannotated.contact_annotated = false;
    CHECK(contact_ratio(std::vector<SequenceDetail>{graze, unannotated}, 27) == doctest::Approx(1.0));
    CHECK_THROWS_AS(contact_ratio(std::vector<SequenceDetail>{unannotated}, 27), InsufficientSamples);
}

TEST_CASE("synthetic families: contact families touch mildly, the others never touch") {
    for (const auto& sk : {motion::SkeletonSpec::toy(), motion::SkeletonSpec::smpl22()}) {
        const auto body = BodyVolume::from_skeleton(sk);
        const motion::MotionLayout layout{motion::LayoutKind::kIH, sk.joint_count()};
        PhysicsConfig cfg;
        for (auto fam : motion::kAllFamilies) {
            for (std::uint64_t seed = 0; seed < 8; ++seed) {
                const auto p = motion::synth_clip(fam, seed, sk, layout, 32);
                const auto d = analyze_pair(p, sk, body, cfg);
                INFO(motion::family_name(fam), " seed ", seed, " max ", d.max_overlap());
                if (motion::family_has_contact(fam)) {
                    CHECK(d.max_overlap() >= 1);
                    CHECK(d.max_overlap() <= cfg.severe_threshold);
                    CHECK(d.valid_contact(cfg.severe_threshold));
                } else {
                    CHECK(d.max_dilated_overlap() == 0);
                }
            }
        }
    }
}

TEST_CASE("property: metrics invariant under joint translation by whole voxels") {
    const auto sk = motion::SkeletonSpec::toy();
    const auto body = BodyVolume::from_skeleton(sk);
    const motion::MotionLayout layout{motion::LayoutKind::kIH, sk.joint_count()};
    Rng rng(8);
    for (int trial = 0; trial < 6; ++trial) {
        auto p = motion::synth_clip(motion::Family::kReachAndTouch, static_cast<std::uint64_t>(trial), sk, layout, 12);
        PhysicsConfig cfg;
        const auto base = analyze_pair(p, sk, body, cfg);
        const Eigen::Vector2d shift(0.02 * static_cast<double>(rng.integer(-20, 20)),
                                    0.02 * static_cast<double>(rng.integer(-20, 20)));
        p.person_a = motion::translate_ground(p.person_a, shift);
        p.person_b = motion::translate_ground(p.person_b, shift);
        const auto moved = analyze_pair(p, sk, body, cfg);
        CHECK(base.overlap == moved.overlap);
        CHECK(base.dilated_overlap == moved.dilated_overlap);
    }
}

TEST_CASE("property: overlap invariant under joint translation of segment bodies") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        auto a = random_body(rng, Eigen::Vector3d::Zero(), 3);
        auto b = random_body(rng, Eigen::Vector3d(0.2, 0, 0), 3);
        const GridParams grid;
        const auto before = brute_force_overlap_oracle(a, b, grid);
        const Eigen::Vector3d shift = 0.02 * Eigen::Vector3d(rng.integer(-30, 30), rng.integer(-30, 30),
                                                             rng.integer(-30, 30));
        for (auto* body : {&a, &b}) {
            for (auto& s : *body) {
                s.a += shift;
                s.b += shift;
            }
        }
        CHECK(before == voxel_overlap(voxelize(std::span<const Segment>(a), grid),
                                      voxelize(std::span<const Segment>(b), grid)));
    }
}

TEST_CASE("report json carries aggregates and rows") {
    const auto sk = motion::SkeletonSpec::toy();
    const motion::MotionLayout layout{motion::LayoutKind::kIH, sk.joint_count()};
    const auto data = motion::synth_dataset(5, 4, sk, layout, {16, 16});
    const auto report = evaluate_physics(data, sk, BodyVolume::from_skeleton(sk), PhysicsConfig{});
    const auto j = report.to_json();
    CHECK(j.at("sequences").size() == 4);
    CHECK(report.annotated == 2);
    REQUIRE(report.contact_ratio.has_value());
    CHECK(*report.contact_ratio == doctest::Approx(1.0));
    CHECK(j.at("severe_threshold_voxels").get<int>() == 27);
}
