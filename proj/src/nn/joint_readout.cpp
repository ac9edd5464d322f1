#include "duo/nn/joint_readout.h"

#include <vector>

#include "duo/error.h"

namespace duo::nn {

torch::Tensor rot6d_to_matrix(const torch::Tensor& r6) {
    auto a1 = r6.narrow(-1, 0, 3);
    auto a2 = r6.narrow(-1, 3, 3);
    auto b1 = a1 / a1.norm(2, -1, true).clamp_min(1e-8);
    auto ortho = a2 - (a2 * b1).sum(-1, true) * b1;
    auto b2 = ortho / ortho.norm(2, -1, true).clamp_min(1e-8);
    auto b3 = torch::cross(b1, b2, -1);
    return torch::stack({b1, b2, b3}, -1);
}

JointReadout::JointReadout(motion::MotionLayout layout, motion::SkeletonSpec skeleton, const motion::NormStats& stats)
    : layout_(layout), skeleton_(std::move(skeleton)) {
    if (layout_.joints != skeleton_.joint_count()) throw ShapeMismatch("readout: layout and skeleton joints differ");
    if (stats.mean.size() != layout_.dim()) throw ShapeMismatch("readout: stats width differs from layout");
    mean_ = torch::from_blob(const_cast<double*>(stats.mean.data()), {stats.mean.size()}, torch::kDouble).clone();
    std_ = torch::from_blob(const_cast<double*>(stats.std.data()), {stats.std.size()}, torch::kDouble).clone();
    const int J = skeleton_.joint_count();
    offsets_ = torch::zeros({J, 3}, torch::kDouble);
    auto acc = offsets_.accessor<double, 2>();
    for (int j = 0; j < J; ++j)
        for (int c = 0; c < 3; ++c) acc[j][c] = skeleton_.rest_offsets[j][c];
}

torch::Tensor JointReadout::operator()(const torch::Tensor& normalized) const {
    if (normalized.dim() != 3 || normalized.size(2) != layout_.dim()) throw ShapeMismatch("readout: expected [B, N, D]");
    const auto opts = normalized.options();
    const auto J = layout_.joints;
    if (layout_.kind == motion::LayoutKind::kIH) {
        auto raw = normalized.narrow(-1, 0, 3 * J) * std_.narrow(0, 0, 3 * J).to(opts) +
                   mean_.narrow(0, 0, 3 * J).to(opts);
        return raw.view({normalized.size(0), normalized.size(1), J, 3});
    }
    return fk(normalized * std_.to(opts) + mean_.to(opts));
}

torch::Tensor JointReadout::fk(const torch::Tensor& raw) const {
    const auto B = raw.size(0);
    const auto N = raw.size(1);
    const int J = skeleton_.joint_count();
    auto mats = rot6d_to_matrix(raw.narrow(-1, 6, 6 * J).reshape({B, N, J, 6}));  // [B, N, J, 3, 3]
    auto offsets = offsets_.to(raw.options());

    std::vector<torch::Tensor> global(J), pos(J);
    global[0] = mats.select(2, 0);
    pos[0] = raw.narrow(-1, 0, 3);
    for (int j = 1; j < J; ++j) {
        const int p = skeleton_.parents[j];
        global[j] = torch::matmul(global[p], mats.select(2, j));
        pos[j] = pos[p] + torch::matmul(global[p], offsets[j].view({3, 1})).squeeze(-1);
    }
    return torch::stack(pos, 2);
}

}  // namespace duo::nn
