#pragma once

#include <Eigen/Core>
#include "json.hpp"

#include "duo/motion/sequence.h"

namespace duo::motion {

/// Per-channel feature statistics shared by both persons.
struct NormStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    static constexpr double kStdFloor = 1e-2;

    /// Throws DegenerateStats for non-finite entries or std <= 1e-8.
    void validate() const;

    nlohmann::json to_json() const;
    static NormStats from_json(const nlohmann::json& j);

    static NormStats identity(int dim);
};

/// Moments over every frame of both persons in every pair; std is floored at
/// NormStats::kStdFloor so constant channels normalize to zero.
NormStats fit_norm_stats(const Dataset& data);

MotionSequence znorm(const MotionSequence& seq, const NormStats& stats);
MotionSequence denorm(const MotionSequence& seq, const NormStats& stats);

}  // namespace duo::motion
