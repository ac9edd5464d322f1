#include "duo/motion/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "duo/error.h"
#include "duo/motion/body.h"
#include "duo/motion/kinematics.h"
#include "duo/motion/rotation.h"
#include "duo/util/random.h"

namespace duo::motion {

namespace {

using V3 = Eigen::Vector3d;
using M3 = Eigen::Matrix3d;

constexpr double kPi = std::numbers::pi;
constexpr double kDt = 1.0 / kFramesPerSecond;
constexpr double kHangAngle = 0.15;

double smooth(double a, double b, double u) {
    const double t = std::clamp((u - a) / (b - a), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

V3 heading(double yaw) { return {std::sin(yaw), 0.0, std::cos(yaw)}; }

struct Roles {
    int l_shoulder, l_wrist, r_shoulder, r_wrist, l_hip, r_hip, torso_top;
    std::vector<V3> rest;
    std::vector<double> radii;
    std::vector<std::vector<int>> children;
    double standing;

    explicit Roles(const SkeletonSpec& sk)
        : l_shoulder(sk.require("left_shoulder")),
          l_wrist(sk.require("left_wrist")),
          r_shoulder(sk.require("right_shoulder")),
          r_wrist(sk.require("right_wrist")),
          l_hip(sk.require("left_hip")),
          r_hip(sk.require("right_hip")),
          rest(rest_positions(sk)),
          radii(bone_radii(sk)),
          children(sk.joint_count()),
          standing(standing_height(sk)) {
        torso_top = sk.parents[l_shoulder];
        if (sk.names[torso_top].find("collar") != std::string::npos) torso_top = sk.parents[torso_top];
        for (int j = 1; j < sk.joint_count(); ++j) children[sk.parents[j]].push_back(j);
    }

    double arm_length() const { return (rest[r_wrist] - rest[r_shoulder]).norm(); }
};

struct PersonFrame {
    V3 root = V3::Zero();  // ground-plane position; height is added when posing
    double yaw = 0.0;
    double leg_swing = 0.0;
    V3 left_dir = V3::Zero();  // world-space arm target directions
    V3 right_dir = V3::Zero();
    double left_w = 0.0;
    double right_w = 0.0;
};

using Track = std::vector<PersonFrame>;

class Poser {
public:
    Poser(const SkeletonSpec& sk, const Roles& roles) : sk_(sk), roles_(roles) {}

    std::vector<M3> pose(const PersonFrame& pf) {
        local_.assign(sk_.joint_count(), M3::Identity());
        local_[0] = rot_y(pf.yaw);
        local_[roles_.l_hip] = axis_angle(V3::UnitX(), -pf.leg_swing);
        local_[roles_.r_hip] = axis_angle(V3::UnitX(), pf.leg_swing);
        arm(roles_.l_shoulder, roles_.l_wrist, +1.0, pf, pf.left_dir, pf.left_w);
        arm(roles_.r_shoulder, roles_.r_wrist, -1.0, pf, pf.right_dir, pf.right_w);
        return local_;
    }

private:
    M3 global(int j) const {
        M3 g = M3::Identity();
        std::vector<int> chain;
        for (int k = j; k >= 0; k = sk_.parents[k]) chain.push_back(k);
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) g = g * local_[*it];
        return g;
    }

    void arm(int shoulder, int wrist, double side, const PersonFrame& pf, const V3& target, double w) {
        const V3 hang_body(side * std::sin(kHangAngle), -std::cos(kHangAngle), 0.0);
        const V3 hang = rot_y(pf.yaw) * axis_angle(V3::UnitX(), side * 0.5 * pf.leg_swing) * hang_body;
        V3 dir = hang;
        if (w > 0.0) dir = ((1.0 - w) * hang + w * target.normalized()).normalized();

        const M3 rp = global(sk_.parents[shoulder]);
        const V3 rest_vec = roles_.rest[wrist] - roles_.rest[shoulder];
        const M3 q = Eigen::Quaterniond::FromTwoVectors(rp * rest_vec, dir).toRotationMatrix();
        local_[shoulder] = rp.transpose() * q * rp;

        // Raised hands with fingers turn palm-up so the fingers do not jut forward.
        if (w > 0.0 && !roles_.children[wrist].empty()) {
            const M3 gp = global(sk_.parents[wrist]);
            const M3 up = Eigen::Quaterniond::FromTwoVectors(gp * rest_vec, V3::UnitY()).toRotationMatrix();
            const Eigen::Quaterniond full(gp.transpose() * up * gp);
            local_[wrist] = Eigen::Quaterniond::Identity().slerp(w, full).toRotationMatrix();
        }
    }

    const SkeletonSpec& sk_;
    const Roles& roles_;
    std::vector<M3> local_;
};

/// Leg and arm swing driven by ground speed.
void apply_gait(Track& track, double amplitude_scale, double phase0) {
    const auto n = track.size();
    double phase = phase0;
    for (std::size_t f = 0; f < n; ++f) {
        double speed = 0.0;
        if (n > 1) {
            const std::size_t a = f == 0 ? 0 : f - 1;
            const std::size_t b = f == 0 ? 1 : f;
            speed = (track[b].root - track[a].root).norm() / kDt;
        }
        const double amp = std::min(0.45, 0.5 * speed) * amplitude_scale;
        phase += 2.0 * kPi * 1.8 * kDt;
        track[f].leg_swing = amp * std::sin(phase);
    }
}

double clip_u(int f, int n) { return n > 1 ? static_cast<double>(f) / (n - 1) : 0.0; }

int peak_frame(int n, double u) { return static_cast<int>(std::lround((n - 1) * u)); }

struct Placement {
    V3 center;
    double axis;  // yaw of the A -> B direction
};

Placement place(Rng& rng) {
    const double cx = rng.uniform(-0.5, 0.5);
    const double cz = rng.uniform(-0.5, 0.5);
    return {V3(cx, 0.0, cz), rng.uniform(0.0, 2.0 * kPi)};
}

std::pair<Track, Track> approach(Rng& rng, int n) {
    const auto pl = place(rng);
    const double s0 = rng.uniform(2.6, 3.4);
    const double s1 = rng.uniform(1.2, 1.6);
    const double share = rng.uniform(0.3, 0.7);
    const double jitter_a = rng.uniform(-0.15, 0.15);
    const double jitter_b = rng.uniform(-0.15, 0.15);
    const V3 e = heading(pl.axis);
    Track a(n), b(n);
    for (int f = 0; f < n; ++f) {
        const double closed = (s0 - s1) * smooth(0.05, 0.9, clip_u(f, n));
        a[f].root = pl.center - e * (s0 / 2) + e * (share * closed);
        b[f].root = pl.center + e * (s0 / 2) - e * ((1.0 - share) * closed);
        a[f].yaw = pl.axis + jitter_a;
        b[f].yaw = pl.axis + kPi + jitter_b;
    }
    apply_gait(a, 1.0, rng.uniform(0.0, 2.0 * kPi));
    apply_gait(b, 1.0, rng.uniform(0.0, 2.0 * kPi));
    return {a, b};
}

std::pair<Track, Track> circle(Rng& rng, int n) {
    const auto pl = place(rng);
    const double radius = rng.uniform(0.8, 1.1);
    const double sweep = rng.uniform(0.6 * kPi, 1.0 * kPi) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    Track a(n), b(n);
    for (int f = 0; f < n; ++f) {
        const double theta = pl.axis + sweep * clip_u(f, n);
        const V3 r = heading(theta) * radius;
        a[f].root = pl.center + r;
        b[f].root = pl.center - r;
        a[f].yaw = theta + kPi;
        b[f].yaw = theta;
    }
    apply_gait(a, 0.5, rng.uniform(0.0, 2.0 * kPi));
    apply_gait(b, 0.5, rng.uniform(0.0, 2.0 * kPi));
    return {a, b};
}

/// Both right arms meet straight between the right shoulders, wrists ending
/// `gap` apart so the wrist capsules overlap slightly.
std::pair<Track, Track> reach_and_touch(Rng& rng, int n, const Roles& roles) {
    const auto pl = place(rng);
    const double depth = rng.uniform(0.042, 0.050);
    const double gap = std::clamp(2.0 * roles.radii[roles.r_wrist] - depth, 0.01, 0.045);
    const double len = roles.arm_length();
    const V3 s = roles.rest[roles.r_shoulder];
    const double reach = 2.0 * len + gap;
    const double sep = 2.0 * s.z() + std::sqrt(std::max(reach * reach - 4.0 * s.x() * s.x(), 1e-6));

    const V3 e = heading(pl.axis);
    const V3 root_a = pl.center - e * (sep / 2);
    const V3 root_b = pl.center + e * (sep / 2);
    const double yaw_a = pl.axis;
    const double yaw_b = pl.axis + kPi;
    const V3 sa = root_a + rot_y(yaw_a) * s;
    const V3 sb = root_b + rot_y(yaw_b) * s;
    const V3 mid = 0.5 * (sa + sb);

    const int peak = peak_frame(n, 0.55);
    Track a(n), b(n);
    for (int f = 0; f < n; ++f) {
        const double u = clip_u(f, n);
        const double w = f == peak ? 1.0 : smooth(0.15, 0.45, u) - smooth(0.65, 0.9, u);
        a[f].root = root_a;
        b[f].root = root_b;
        a[f].yaw = yaw_a;
        b[f].yaw = yaw_b;
        a[f].right_dir = mid - sa;
        b[f].right_dir = mid - sb;
        a[f].right_w = w;
        b[f].right_w = w;
    }
    return {a, b};
}

/// A places both hands on B's chest, sinking slightly into the torso capsule,
/// then B steps back.
std::pair<Track, Track> push_retreat(Rng& rng, int n, const Roles& roles) {
    const auto pl = place(rng);
    const double sink = rng.uniform(0.015, 0.022);
    const double retreat = rng.uniform(0.4, 0.7);
    const double len = roles.arm_length();
    const V3 ls = roles.rest[roles.l_shoulder];
    const double torso_r = roles.radii[roles.torso_top];
    const double rho = torso_r + roles.radii[roles.l_wrist] - sink;
    const double xt = 0.06;
    const double yt = roles.rest[roles.torso_top].y() - 0.08;
    const double inset = std::sqrt(rho * rho - xt * xt);
    const double dx = xt - ls.x();
    const double dy = yt - ls.y();
    const double forward = std::sqrt(std::max(len * len - dx * dx - dy * dy, 1e-6));
    const double sep = inset + forward;

    const V3 e = heading(pl.axis);
    const V3 root_a = pl.center - e * (sep / 2);
    const V3 root_b0 = pl.center + e * (sep / 2);
    const M3 ra = rot_y(pl.axis);
    const V3 tl = root_a + ra * V3(xt, yt, sep - inset);
    const V3 tr = root_a + ra * V3(-xt, yt, sep - inset);
    const V3 sl = root_a + ra * roles.rest[roles.l_shoulder];
    const V3 sr = root_a + ra * roles.rest[roles.r_shoulder];

    const int peak = peak_frame(n, 0.45);
    Track a(n), b(n);
    for (int f = 0; f < n; ++f) {
        const double u = clip_u(f, n);
        const double w = f == peak ? 1.0 : smooth(0.1, 0.4, u) - smooth(0.5, 0.75, u);
        a[f].root = root_a;
        a[f].yaw = pl.axis;
        a[f].left_dir = tl - sl;
        a[f].right_dir = tr - sr;
        a[f].left_w = w;
        a[f].right_w = w;
        b[f].root = root_b0 + e * (retreat * smooth(0.45, 0.85, u));
        b[f].yaw = pl.axis + kPi;
    }
    apply_gait(b, 1.0, rng.uniform(0.0, 2.0 * kPi));
    return {a, b};
}

MotionSequence render(const Track& track, const SkeletonSpec& sk, const Roles& roles, const MotionLayout& layout) {
    Poser poser(sk, roles);
    std::vector<V3> roots;
    std::vector<std::vector<M3>> locals;
    roots.reserve(track.size());
    locals.reserve(track.size());
    for (const auto& pf : track) {
        roots.emplace_back(pf.root.x(), roles.standing, pf.root.z());
        locals.push_back(poser.pose(pf));
    }
    return compose_sequence(layout, sk, roots, locals);
}

}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::kApproach: return "approach";
        case Family::kCircle: return "circle";
        case Family::kReachAndTouch: return "reach-and-touch";
        case Family::kPushRetreat: return "push-retreat";
    }
    return "unknown";
}

std::optional<Family> parse_family(std::string_view name) {
    for (auto f : kAllFamilies) {
        if (family_name(f) == name) return f;
    }
    return std::nullopt;
}

bool family_has_contact(Family f) { return f == Family::kReachAndTouch || f == Family::kPushRetreat; }

const std::vector<std::string>& family_templates(Family f) {
    static const std::vector<std::string> approach = {
        "two people walk toward each other",
        "the two persons approach each other and stop",
        "one person and another walk up to each other",
    };
    static const std::vector<std::string> circle = {
        "two people circle around each other",
        "the two persons move in a circle while facing each other",
        "they walk around each other in a circle",
    };
    static const std::vector<std::string> reach = {
        "two people reach out and touch hands",
        "the two persons extend their right hands until they touch",
        "they greet each other by touching hands",
    };
    static const std::vector<std::string> push = {
        "one person pushes the other who steps back",
        "the first person shoves the second person backward",
        "a person pushes the other person away",
    };
    switch (f) {
        case Family::kApproach: return approach;
        case Family::kCircle: return circle;
        case Family::kReachAndTouch: return reach;
        case Family::kPushRetreat: return push;
    }
    return approach;
}

std::optional<Family> family_of_text(std::string_view text) {
    for (auto f : kAllFamilies) {
        for (const auto& t : family_templates(f)) {
            if (t == text) return f;
        }
    }
    return std::nullopt;
}

InteractionPair synth_clip(Family family, std::uint64_t clip_seed, const SkeletonSpec& skeleton,
                           const MotionLayout& layout, int frames) {
    if (frames < 1) throw InvalidArgument("synth_clip: frames must be >= 1");
    const Roles roles(skeleton);
    Rng rng(clip_seed);
    const auto& templates = family_templates(family);
    std::string text = templates[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(templates.size()) - 1))];

    std::pair<Track, Track> tracks;
    switch (family) {
        case Family::kApproach: tracks = approach(rng, frames); break;
        case Family::kCircle: tracks = circle(rng, frames); break;
        case Family::kReachAndTouch: tracks = reach_and_touch(rng, frames, roles); break;
        case Family::kPushRetreat: tracks = push_retreat(rng, frames, roles); break;
    }
    InteractionPair pair;
    pair.person_a = render(tracks.first, skeleton, roles, layout);
    pair.person_b = render(tracks.second, skeleton, roles, layout);
    pair.text = std::move(text);
    pair.contact_annotated = family_has_contact(family);
    return pair;
}

Dataset synth_dataset(std::uint64_t seed, int count, const SkeletonSpec& skeleton, const MotionLayout& layout,
                      FrameRange range, const std::vector<Family>& families) {
    if (count < 1) throw InvalidArgument("synth_dataset: count must be >= 1");
    if (range.min < 1 || range.max < range.min) throw InvalidArgument("synth_dataset: invalid frame range");
    if (families.empty()) throw InvalidArgument("synth_dataset: no families selected");
    skeleton.validate();
    Dataset out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const std::uint64_t clip_seed = seed ^ static_cast<std::uint64_t>(i);
        Rng frame_rng(clip_seed ^ 0x9e3779b97f4a7c15ull);
        const int frames = static_cast<int>(frame_rng.integer(range.min, range.max));
        out.push_back(synth_clip(families[static_cast<std::size_t>(i) % families.size()], clip_seed, skeleton, layout,
                                 frames));
    }
    return out;
}

}  // namespace duo::motion
