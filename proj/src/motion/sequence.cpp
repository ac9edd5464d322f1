#include "duo/motion/sequence.h"

#include "duo/error.h"
#include "duo/motion/rotation.h"

namespace duo::motion {

int MotionLayout::dim() const {
    if (kind == LayoutKind::kIH) return 3 * joints + 3 * joints + 6 * (joints - 1) + 4;
    return 6 * (joints + 1);
}

std::string MotionLayout::name() const {
    if (*this == ih262()) return "ih262";
    if (*this == ix56x6()) return "ix56x6";
    return std::string(kind == LayoutKind::kIH ? "ih" : "ix") + "/" + std::to_string(joints) + "j";
}

nlohmann::json MotionLayout::to_json() const {
    return {{"kind", kind == LayoutKind::kIH ? "ih" : "ix"}, {"joints", joints}, {"dim", dim()}};
}

MotionLayout MotionLayout::from_json(const nlohmann::json& j) {
    try {
        auto layout = parse(j.at("kind").get<std::string>(), j.at("joints").get<int>());
        if (j.contains("dim") && j.at("dim").get<int>() != layout.dim()) {
            throw ShapeMismatch("layout dim disagrees with kind/joints");
        }
        return layout;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed layout: ") + e.what());
    }
}

MotionLayout MotionLayout::parse(const std::string& kind, int joints) {
    if (joints < 2) throw InvalidArgument("layout needs at least two joints");
    if (kind == "ih" || kind == "ih262") return {LayoutKind::kIH, joints};
    if (kind == "ix" || kind == "ix56x6") return {LayoutKind::kIX, joints};
    throw InvalidArgument("unknown layout kind '" + kind + "'");
}

void MotionSequence::validate() const {
    if (data.rows() < 1) throw InvalidArgument("motion sequence has no frames");
    if (data.cols() != layout.dim()) {
        throw ShapeMismatch("motion sequence has " + std::to_string(data.cols()) + " channels, layout " +
                            layout.name() + " expects " + std::to_string(layout.dim()));
    }
    if (!data.allFinite()) throw InvalidArgument("motion sequence contains NaN/Inf");
    if (layout.kind == LayoutKind::kIX) {
        for (Eigen::Index f = 0; f < data.rows(); ++f) {
            for (int j = 0; j < layout.joints; ++j) {
                Eigen::Matrix<double, 6, 1> v = data.row(f).segment<6>(6 + 6 * j).transpose().cast<double>();
                rot6d_to_matrix(Rotation6D(v));
            }
        }
    }
}

void InteractionPair::validate() const {
    person_a.validate();
    person_b.validate();
    if (!(person_a.layout == person_b.layout)) throw ShapeMismatch("pair members use different layouts");
    if (person_a.frames() != person_b.frames()) throw ShapeMismatch("pair members have different frame counts");
}

}  // namespace duo::motion
