#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

namespace duo::motion {

using FrameMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-frame channel packing.
///
/// kIH (InterHuman style, 262 channels at 22 joints):
///   [ J*3 global positions | J*3 global velocities | (J-1)*6 local 6D rotations | 4 foot contacts ]
/// kIX (InterX style, 56x6 at 55 joints):
///   row 0 = [root translation(3), root velocity(3)], rows 1..J = per-joint local 6D rotations
enum class LayoutKind { kIH, kIX };

struct MotionLayout {
    LayoutKind kind = LayoutKind::kIH;
    int joints = 22;

    int dim() const;
    int position_offset() const { return 0; }
    int velocity_offset() const { return kind == LayoutKind::kIH ? 3 * joints : 3; }
    /// First channel of the rotation block; for kIH the block covers joints 1..J-1.
    int rotation_offset() const { return kind == LayoutKind::kIH ? 6 * joints : 6; }
    int contact_offset() const { return 6 * joints + 6 * (joints - 1); }

    std::string name() const;
    nlohmann::json to_json() const;
    static MotionLayout from_json(const nlohmann::json& j);
    static MotionLayout parse(const std::string& kind, int joints);

    static MotionLayout ih262() { return {LayoutKind::kIH, 22}; }
    static MotionLayout ix56x6() { return {LayoutKind::kIX, 55}; }

    friend bool operator==(const MotionLayout&, const MotionLayout&) = default;
};

struct MotionSequence {
    MotionLayout layout;
    FrameMatrix data;  // frames x layout.dim()

    MotionSequence() = default;
    MotionSequence(MotionLayout l, FrameMatrix d) : layout(l), data(std::move(d)) {}

    int frames() const { return static_cast<int>(data.rows()); }

    /// Throws ShapeMismatch / InvalidArgument / DegenerateRotation.
    void validate() const;

    friend bool operator==(const MotionSequence& a, const MotionSequence& b) {
        return a.layout == b.layout && a.data.rows() == b.data.rows() && a.data.cols() == b.data.cols() &&
               a.data == b.data;
    }
};

struct InteractionPair {
    MotionSequence person_a;
    MotionSequence person_b;
    std::string text;
    bool contact_annotated = false;

    int frames() const { return person_a.frames(); }
    void validate() const;

    friend bool operator==(const InteractionPair&, const InteractionPair&) = default;
};

using Dataset = std::vector<InteractionPair>;

}  // namespace duo::motion
