#pragma once

#include <span>
#include <vector>

#include <torch/torch.h>

#include "duo/motion/normalize.h"
#include "duo/motion/sequence.h"

namespace duo::nn {

/// [N, D] float copy.
torch::Tensor to_tensor(const motion::FrameMatrix& m);
motion::FrameMatrix to_frames(const torch::Tensor& t);

/// Stacks z-normalized sequences of equal length into [B, N, D] float.
torch::Tensor normalized_batch(std::span<const motion::MotionSequence* const> seqs, const motion::NormStats& stats);

/// Person-a and person-b batches for the given pair indices.
struct PairBatch {
    torch::Tensor x_a, x_b;
};
PairBatch make_batch(const motion::Dataset& data, std::span<const int> indices, const motion::NormStats& stats);

}  // namespace duo::nn
