#pragma once

#include <torch/torch.h>

namespace duo::nn {

/// Scaled dot-product attention with separate q/k/v/out projections.
/// Inputs are batch-first: [B, Lq, H] queries, [B, Lk, H] keys and values.
class MultiheadAttentionImpl : public torch::nn::Module {
public:
    MultiheadAttentionImpl(int64_t hidden, int64_t heads, double dropout);

    torch::Tensor forward(const torch::Tensor& query, const torch::Tensor& key_value);

    int64_t heads() const { return heads_; }

    torch::nn::Linear q{nullptr}, k{nullptr}, v{nullptr}, out{nullptr};

private:
    int64_t heads_;
    torch::nn::Dropout drop{nullptr};
};
TORCH_MODULE(MultiheadAttention);

/// Linear -> GELU -> dropout -> Linear.
class FeedForwardImpl : public torch::nn::Module {
public:
    FeedForwardImpl(int64_t hidden, int64_t inner, double dropout);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Linear fc1{nullptr}, fc2{nullptr};

private:
    torch::nn::Dropout drop{nullptr};
};
TORCH_MODULE(FeedForward);

/// Pre-norm self-attention block.
class EncoderLayerImpl : public torch::nn::Module {
public:
    EncoderLayerImpl(int64_t hidden, int64_t heads, int64_t inner, double dropout);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
    MultiheadAttention attn{nullptr};
    FeedForward ff{nullptr};
    torch::nn::Dropout drop{nullptr};
};
TORCH_MODULE(EncoderLayer);

/// Pre-norm self-attention, cross-attention to a memory, feed-forward.
class DecoderLayerImpl : public torch::nn::Module {
public:
    DecoderLayerImpl(int64_t hidden, int64_t heads, int64_t inner, double dropout);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& memory);

private:
    torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr}, norm3{nullptr}, norm_mem{nullptr};
    MultiheadAttention self_attn{nullptr}, cross_attn{nullptr};
    FeedForward ff{nullptr};
    torch::nn::Dropout drop{nullptr};
};
TORCH_MODULE(DecoderLayer);

/// [length, hidden] fixed sinusoidal table.
torch::Tensor sinusoidal_table(int64_t length, int64_t hidden);

/// In-place normal(0, std) with entries beyond 2 std redrawn.
void trunc_normal_(torch::Tensor t, double std);

/// Truncated-normal (std 0.02, |x| <= 2 std) weights and zero biases for every
/// Linear; LayerNorm to identity.
void init_transformer_weights(torch::nn::Module& root);

/// Zeroes weight and bias of one linear layer.
void zero_linear(torch::nn::Linear& layer);

}  // namespace duo::nn
