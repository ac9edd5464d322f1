#include "duo/nn/tensor.h"

#include <cstring>

#include "duo/error.h"

namespace duo::nn {

torch::Tensor to_tensor(const motion::FrameMatrix& m) {
    return torch::from_blob(const_cast<float*>(m.data()), {m.rows(), m.cols()}, torch::kFloat).clone();
}

motion::FrameMatrix to_frames(const torch::Tensor& t) {
    if (t.dim() != 2) throw ShapeMismatch("to_frames expects [N, D]");
    auto c = t.detach().to(torch::kFloat).contiguous();
    motion::FrameMatrix m(c.size(0), c.size(1));
    std::memcpy(m.data(), c.data_ptr<float>(), sizeof(float) * static_cast<std::size_t>(c.numel()));
    return m;
}

torch::Tensor normalized_batch(std::span<const motion::MotionSequence* const> seqs, const motion::NormStats& stats) {
    if (seqs.empty()) throw InvalidArgument("normalized_batch: empty batch");
    std::vector<torch::Tensor> items;
    items.reserve(seqs.size());
    for (const auto* s : seqs) {
        if (s->frames() != seqs.front()->frames()) throw ShapeMismatch("batch sequences differ in length");
        items.push_back(to_tensor(motion::znorm(*s, stats).data));
    }
    return torch::stack(items);
}

PairBatch make_batch(const motion::Dataset& data, std::span<const int> indices, const motion::NormStats& stats) {
    std::vector<const motion::MotionSequence*> a, b;
    for (int i : indices) {
        a.push_back(&data.at(static_cast<std::size_t>(i)).person_a);
        b.push_back(&data.at(static_cast<std::size_t>(i)).person_b);
    }
    return {normalized_batch(a, stats), normalized_batch(b, stats)};
}

}  // namespace duo::nn
