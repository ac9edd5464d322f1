#pragma once

#include <array>
#include <utility>
#include <vector>

#include <torch/torch.h>
#include "json.hpp"

#include "duo/nn/diffusion.h"
#include "duo/nn/layers.h"

namespace duo::nn {

enum class SegmentId : int64_t { kGlobal = 0, kPersonA = 1, kPersonB = 2 };

struct DenoiserConfig {
    int latent_dim = 256;
    int latent_tokens = 1;
    int hidden_dim = 1024;
    int heads = 4;
    int ff_dim = 2048;
    int layers = 13;
    double dropout = 0.1;
    int text_dim = 64;
    int T = 1000;
    /// s_l; individual latents are divided by it before diffusion.
    double token_scale = 1.0;

    void validate() const;
    nlohmann::json to_json() const;
    static DenoiserConfig from_json(const nlohmann::json& j) { return from_json(j, DenoiserConfig{}); }
    static DenoiserConfig from_json(const nlohmann::json& j, DenoiserConfig base);

    friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

/// Outer-to-inner pairs (k, layers - 1 - k), zero-based; an odd depth leaves the middle layer unpaired.
std::vector<std::pair<int, int>> skip_pairs(int layers);

/// Token layout [z_o | z_a | z_b], l tokens each.
torch::Tensor canonical_segments(int latent_tokens);

/// Global tokens unchanged, individual tokens divided (scale) or multiplied (unscale) by s.
torch::Tensor token_scale(const torch::Tensor& tokens, int latent_tokens, double s);
torch::Tensor token_unscale(const torch::Tensor& tokens, int latent_tokens, double s);

/// Concatenates [z_o | z_a | z_b] along the token axis and splits it back.
torch::Tensor pack_tokens(const torch::Tensor& z_o, const torch::Tensor& z_a, const torch::Tensor& z_b);
std::array<torch::Tensor, 3> unpack_tokens(const torch::Tensor& tokens, int latent_tokens);

/// Pre-norm block whose (shift, scale, gate) pairs come from the condition;
/// the modulation map starts at zero so the block starts as the identity.
class AdaLNBlockImpl : public torch::nn::Module {
public:
    AdaLNBlockImpl(int64_t hidden, int64_t heads, int64_t inner, double dropout);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& c);

    torch::nn::Linear modulation{nullptr};
    MultiheadAttention attn{nullptr};
    FeedForward ff{nullptr};

private:
    torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
};
TORCH_MODULE(AdaLNBlock);

class DenoiserImpl : public torch::nn::Module, public NoisePredictor {
public:
    explicit DenoiserImpl(DenoiserConfig cfg);

    const DenoiserConfig& config() const { return cfg_; }
    void set_token_scale(double s) { cfg_.token_scale = s; }

    /// Table lookup then Linear-SiLU-Linear; throws TimestepOutOfRange outside [1, T].
    torch::Tensor timestep_embed(const torch::Tensor& t);
    /// Adds the segment row and, within a segment, the position row.
    torch::Tensor segment_positional_encode(const torch::Tensor& tokens, const torch::Tensor& segment_ids);
    /// text_proj(text), or the null embedding for dropped rows.
    torch::Tensor text_embed(const Condition& c);

    torch::Tensor forward(const torch::Tensor& z_t, const torch::Tensor& t, const Condition& c,
                          const torch::Tensor& segment_ids = {});

    torch::Tensor predict(const torch::Tensor& z_t, const torch::Tensor& t, const Condition& c) override {
        return forward(z_t, t, c);
    }

    torch::nn::Linear input{nullptr}, text_proj{nullptr}, time_fc1{nullptr}, time_fc2{nullptr}, output{nullptr};
    torch::nn::Embedding time_table{nullptr};
    torch::Tensor segment_table, position_table, null_text;
    torch::nn::ModuleList blocks{nullptr};
    torch::nn::ModuleList skip_proj{nullptr};  // one per pair, applied at the inner layer
    torch::nn::LayerNorm final_norm{nullptr};

private:
    DenoiserConfig cfg_;
};
TORCH_MODULE(Denoiser);

}  // namespace duo::nn
