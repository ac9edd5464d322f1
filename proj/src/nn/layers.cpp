#include "duo/nn/layers.h"

#include <cmath>

#include "duo/error.h"

namespace duo::nn {

MultiheadAttentionImpl::MultiheadAttentionImpl(int64_t hidden, int64_t heads, double dropout) : heads_(heads) {
    if (heads < 1 || hidden % heads != 0) throw InvalidArgument("hidden_dim must be divisible by heads");
    q = register_module("q", torch::nn::Linear(hidden, hidden));
    k = register_module("k", torch::nn::Linear(hidden, hidden));
    v = register_module("v", torch::nn::Linear(hidden, hidden));
    out = register_module("out", torch::nn::Linear(hidden, hidden));
    drop = register_module("drop", torch::nn::Dropout(dropout));
}

torch::Tensor MultiheadAttentionImpl::forward(const torch::Tensor& query, const torch::Tensor& key_value) {
    const auto b = query.size(0);
    const auto lq = query.size(1);
    const auto lk = key_value.size(1);
    const auto h = query.size(2);
    if (key_value.size(0) != b || key_value.size(2) != h) throw ShapeMismatch("attention query/key shape mismatch");
    const auto dh = h / heads_;

    auto split = [&](const torch::Tensor& t, int64_t len) { return t.view({b, len, heads_, dh}).transpose(1, 2); };
    auto qh = split(q(query), lq);
    auto kh = split(k(key_value), lk);
    auto vh = split(v(key_value), lk);

    auto scores = torch::matmul(qh, kh.transpose(-2, -1)) / std::sqrt(static_cast<double>(dh));
    auto weights = drop(torch::softmax(scores, -1));
    auto ctx = torch::matmul(weights, vh).transpose(1, 2).contiguous().view({b, lq, h});
    return out(ctx);
}

FeedForwardImpl::FeedForwardImpl(int64_t hidden, int64_t inner, double dropout) {
    fc1 = register_module("fc1", torch::nn::Linear(hidden, inner));
    fc2 = register_module("fc2", torch::nn::Linear(inner, hidden));
    drop = register_module("drop", torch::nn::Dropout(dropout));
}

torch::Tensor FeedForwardImpl::forward(const torch::Tensor& x) {
    return fc2(drop(torch::gelu(fc1(x))));
}

EncoderLayerImpl::EncoderLayerImpl(int64_t hidden, int64_t heads, int64_t inner, double dropout) {
    norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({hidden})));
    norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({hidden})));
    attn = register_module("attn", MultiheadAttention(hidden, heads, dropout));
    ff = register_module("ff", FeedForward(hidden, inner, dropout));
    drop = register_module("drop", torch::nn::Dropout(dropout));
}

torch::Tensor EncoderLayerImpl::forward(const torch::Tensor& x) {
    auto n = norm1(x);
    auto y = x + drop(attn(n, n));
    return y + drop(ff(norm2(y)));
}

DecoderLayerImpl::DecoderLayerImpl(int64_t hidden, int64_t heads, int64_t inner, double dropout) {
    norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({hidden})));
    norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({hidden})));
    norm3 = register_module("norm3", torch::nn::LayerNorm(torch::nn::LayerNormOptions({hidden})));
    norm_mem = register_module("norm_mem", torch::nn::LayerNorm(torch::nn::LayerNormOptions({hidden})));
    self_attn = register_module("self_attn", MultiheadAttention(hidden, heads, dropout));
    cross_attn = register_module("cross_attn", MultiheadAttention(hidden, heads, dropout));
    ff = register_module("ff", FeedForward(hidden, inner, dropout));
    drop = register_module("drop", torch::nn::Dropout(dropout));
}

torch::Tensor DecoderLayerImpl::forward(const torch::Tensor& x, const torch::Tensor& memory) {
    auto n = norm1(x);
    auto y = x + drop(self_attn(n, n));
    y = y + drop(cross_attn(norm2(y), norm_mem(memory)));
    return y + drop(ff(norm3(y)));
}

torch::Tensor sinusoidal_table(int64_t length, int64_t hidden) {
    auto pos = torch::arange(length, torch::kDouble).unsqueeze(1);
    auto idx = torch::arange(0, hidden, 2, torch::kDouble);
    auto freq = torch::exp(idx * (-std::log(10000.0) / static_cast<double>(hidden)));
    auto table = torch::zeros({length, hidden}, torch::kDouble);
    table.index_put_({torch::indexing::Slice(), torch::indexing::Slice(0, torch::indexing::None, 2)},
                     torch::sin(pos * freq));
    const auto odd = hidden / 2;
    table.index_put_({torch::indexing::Slice(), torch::indexing::Slice(1, torch::indexing::None, 2)},
                     torch::cos(pos * freq.slice(0, 0, odd)));
    return table.to(torch::kFloat);
}

void trunc_normal_(torch::Tensor t, double std) {
    torch::NoGradGuard guard;
    t.normal_(0.0, std);
    for (;;) {
        auto bad = t.abs() > 2.0 * std;
        if (!bad.any().item<bool>()) break;
        t.masked_scatter_(bad, torch::randn({bad.sum().item<int64_t>()}, t.options()) * std);
    }
}

void init_transformer_weights(torch::nn::Module& root) {
    torch::NoGradGuard guard;
    for (auto& m : root.modules(/*include_self=*/false)) {
        if (auto* lin = m->as<torch::nn::Linear>()) {
            trunc_normal_(lin->weight, 0.02);
            if (lin->bias.defined()) lin->bias.zero_();
        } else if (auto* ln = m->as<torch::nn::LayerNorm>(); ln && ln->weight.defined()) {
            ln->weight.fill_(1.0);
            ln->bias.zero_();
        }
    }
}

void zero_linear(torch::nn::Linear& layer) {
    torch::NoGradGuard guard;
    layer->weight.zero_();
    if (layer->bias.defined()) layer->bias.zero_();
}

}  // namespace duo::nn
