#pragma once

#include <torch/torch.h>

#include "duo/motion/normalize.h"
#include "duo/motion/sequence.h"
#include "duo/motion/skeleton.h"

namespace duo::nn {

/// Differentiable map from normalized features [B, N, D] to global joint
/// positions [B, N, J, 3] in meters. kIH reads the denormalized position
/// block; kIX runs forward kinematics on the denormalized 6D rotations.
class JointReadout {
public:
    JointReadout(motion::MotionLayout layout, motion::SkeletonSpec skeleton, const motion::NormStats& stats);

    torch::Tensor operator()(const torch::Tensor& normalized) const;

    const motion::MotionLayout& layout() const { return layout_; }

private:
    torch::Tensor fk(const torch::Tensor& raw) const;

    motion::MotionLayout layout_;
    motion::SkeletonSpec skeleton_;
    torch::Tensor mean_;
    torch::Tensor std_;
    torch::Tensor offsets_;  // [J, 3]
};

/// Batched Gram-Schmidt: [..., 6] -> [..., 3, 3] with the two inputs as the first two columns.
torch::Tensor rot6d_to_matrix(const torch::Tensor& r6);

}  // namespace duo::nn
