#include "duo/motion/skeleton.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "duo/error.h"

namespace duo::motion {

namespace {

using V = Eigen::Vector3d;

std::array<int, 4> guess_foot_joints(const SkeletonSpec& s) {
    auto pick = [&](std::initializer_list<const char*> candidates) {
        for (const char* c : candidates) {
            if (auto idx = s.find(c)) return *idx;
        }
        return 0;
    };
    return {pick({"left_ankle", "left_foot"}), pick({"left_foot", "left_ankle"}),
            pick({"right_ankle", "right_foot"}), pick({"right_foot", "right_ankle"})};
}

struct Fnv1a {
    std::uint64_t h = 1469598103934665603ull;
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 1099511628211ull;
        }
    }
    template <typename T>
    void value(T v) {
        bytes(&v, sizeof(v));
    }
};

}  // namespace

SkeletonSpec::SkeletonSpec(std::vector<std::string> n, std::vector<int> p, std::vector<Eigen::Vector3d> o)
    : names(std::move(n)), parents(std::move(p)), rest_offsets(std::move(o)) {
    if (names.size() < parents.size()) {
        for (std::size_t i = names.size(); i < parents.size(); ++i) names.push_back("joint_" + std::to_string(i));
    }
    foot_joints = guess_foot_joints(*this);
}

void SkeletonSpec::validate() const {
    const auto n = parents.size();
    if (n == 0) throw InvalidArgument("skeleton has no joints");
    if (rest_offsets.size() != n || names.size() != n) {
        throw InvalidArgument("skeleton field lengths disagree");
    }
    int roots = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const int p = parents[j];
        if (p == -1) {
            ++roots;
            if (j != 0) throw InvalidArgument("root must be joint 0");
        } else if (p < 0 || p >= static_cast<int>(j)) {
            throw InvalidArgument("parent index must precede child (joint " + std::to_string(j) + ")");
        }
        if (!rest_offsets[j].allFinite()) throw InvalidArgument("non-finite rest offset");
    }
    if (roots != 1) throw InvalidArgument("skeleton must have exactly one root");
    for (int f : foot_joints) {
        if (f < 0 || f >= static_cast<int>(n)) throw InvalidArgument("foot joint out of range");
    }
}

std::optional<int> SkeletonSpec::find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    return std::nullopt;
}

int SkeletonSpec::require(const std::string& name) const {
    if (auto idx = find(name)) return *idx;
    throw InvalidArgument("skeleton has no joint named '" + name + "'");
}

std::string SkeletonSpec::hash() const {
    Fnv1a f;
    f.value(static_cast<std::uint32_t>(parents.size()));
    for (std::size_t j = 0; j < parents.size(); ++j) {
        f.value(static_cast<std::int32_t>(parents[j]));
        for (int k = 0; k < 3; ++k) f.value(std::bit_cast<std::uint32_t>(static_cast<float>(rest_offsets[j][k])));
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << f.h;
    return os.str();
}

nlohmann::json SkeletonSpec::to_json() const {
    nlohmann::json offsets = nlohmann::json::array();
    for (const auto& o : rest_offsets) offsets.push_back({o.x(), o.y(), o.z()});
    return {{"names", names}, {"parents", parents}, {"offsets", offsets}, {"foot_joints", foot_joints}};
}

SkeletonSpec SkeletonSpec::from_json(const nlohmann::json& j) {
    try {
        std::vector<Eigen::Vector3d> offsets;
        for (const auto& o : j.at("offsets")) offsets.emplace_back(o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>());
        std::vector<std::string> names;
        if (j.contains("names")) names = j.at("names").get<std::vector<std::string>>();
        SkeletonSpec s(names, j.at("parents").get<std::vector<int>>(), offsets);
        if (j.contains("foot_joints")) s.foot_joints = j.at("foot_joints").get<std::array<int, 4>>();
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed skeleton json: ") + e.what());
    }
}

SkeletonSpec SkeletonSpec::toy() {
    std::vector<std::string> names = {"pelvis",     "chest",         "head",     "left_shoulder", "left_wrist", "right_shoulder",
                                      "right_wrist", "left_hip",     "left_foot", "right_hip",    "right_foot"};
    std::vector<int> parents = {-1, 0, 1, 1, 3, 1, 5, 0, 7, 0, 9};
    std::vector<V> offsets = {V(0, 0, 0),     V(0, 0.45, 0),  V(0, 0.25, 0),   V(0.18, 0, 0),
                              V(0.55, 0, 0),  V(-0.18, 0, 0), V(-0.55, 0, 0),  V(0.1, -0.05, 0),
                              V(0, -0.85, 0), V(-0.1, -0.05, 0), V(0, -0.85, 0)};
    SkeletonSpec s(names, parents, offsets);
    s.validate();
    return s;
}

SkeletonSpec SkeletonSpec::smpl22() {
    std::vector<std::string> names = {"pelvis",       "left_hip",      "right_hip",     "spine1",         "left_knee",
                                      "right_knee",   "spine2",        "left_ankle",    "right_ankle",    "spine3",
                                      "left_foot",    "right_foot",    "neck",          "left_collar",    "right_collar",
                                      "head",         "left_shoulder", "right_shoulder", "left_elbow",    "right_elbow",
                                      "left_wrist",   "right_wrist"};
    std::vector<int> parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19};
    std::vector<V> offsets = {V(0, 0, 0),       V(0.06, -0.09, 0), V(-0.06, -0.09, 0), V(0, 0.11, 0),
                              V(0.04, -0.38, 0), V(-0.04, -0.38, 0), V(0, 0.14, 0),     V(0, -0.40, 0),
                              V(0, -0.40, 0),    V(0, 0.06, 0),      V(0, -0.05, 0.12), V(0, -0.05, 0.12),
                              V(0, 0.21, 0),     V(0.08, 0.12, 0),   V(-0.08, 0.12, 0), V(0, 0.09, 0.05),
                              V(0.10, 0.03, 0),  V(-0.10, 0.03, 0),  V(0.26, 0, 0),     V(-0.26, 0, 0),
                              V(0.25, 0, 0),     V(-0.25, 0, 0)};
    SkeletonSpec s(names, parents, offsets);
    s.validate();
    return s;
}

SkeletonSpec SkeletonSpec::smplx55() {
    SkeletonSpec body = smpl22();
    auto names = body.names;
    auto parents = body.parents;
    auto offsets = body.rest_offsets;
    const int head = 15;
    names.insert(names.end(), {"jaw", "left_eye", "right_eye"});
    parents.insert(parents.end(), {head, head, head});
    offsets.insert(offsets.end(), {V(0, 0.02, 0.06), V(0.03, 0.06, 0.08), V(-0.03, 0.06, 0.08)});

    struct Finger {
        const char* name;
        V base;
    };
    const Finger fingers[] = {{"index", V(0.09, 0, 0.02)},  {"middle", V(0.095, 0, 0)}, {"pinky", V(0.08, 0, -0.04)},
                              {"ring", V(0.09, 0, -0.02)}, {"thumb", V(0.03, -0.01, 0.03)}};
    for (int side = 0; side < 2; ++side) {
        const std::string prefix = side == 0 ? "left_" : "right_";
        const int wrist = side == 0 ? 20 : 21;
        const double mirror = side == 0 ? 1.0 : -1.0;
        for (const auto& f : fingers) {
            int parent = wrist;
            for (int k = 1; k <= 3; ++k) {
                V off = k == 1 ? f.base : V(0.03, 0, 0);
                off.x() *= mirror;
                names.push_back(prefix + f.name + std::to_string(k));
                parents.push_back(parent);
                offsets.push_back(off);
                parent = static_cast<int>(parents.size()) - 1;
            }
        }
    }
    SkeletonSpec s(names, parents, offsets);
    s.validate();
    return s;
}

SkeletonSpec SkeletonSpec::by_name(const std::string& name) {
    if (name == "toy") return toy();
    if (name == "smpl22") return smpl22();
    if (name == "smplx55") return smplx55();
    std::ifstream in(name);
    if (!in) throw IoError("cannot open skeleton file '" + name + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("skeleton file is not json: ") + e.what());
    }
    return from_json(j);
}

bool operator==(const SkeletonSpec& a, const SkeletonSpec& b) {
    return a.names == b.names && a.parents == b.parents && a.rest_offsets == b.rest_offsets &&
           a.foot_joints == b.foot_joints;
}

}  // namespace duo::motion
