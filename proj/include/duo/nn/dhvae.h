#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include <torch/torch.h>
#include "json.hpp"

#include "duo/nn/layers.h"

namespace duo::nn {

struct DHVAEConfig {
    int feature_dim = 262;
    int latent_dim = 256;
    int latent_tokens = 1;  // l
    int hidden_dim = 1024;
    int heads = 4;
    int ff_dim = 2048;
    double dropout = 0.1;
    int enc_layers_individual = 4;
    int cotransformer_layers = 3;
    int interaction_decoder_layers = 2;
    int person_decoder_layers = 4;
    int max_frames = 300;
    /// One set of weights for both persons' encoders, CoTransformer branches,
    /// fusion inputs and decoders; each person keeps its own token set.
    bool shared_branches = true;
    double kl_weight = 1e-3;
    double joint_weight = 1.0;
    double triplet_weight = 0.1;

    /// Throws InvalidArgument.
    void validate() const;

    nlohmann::json to_json() const;
    /// Missing keys keep their defaults.
    static DHVAEConfig from_json(const nlohmann::json& j) { return from_json(j, DHVAEConfig{}); }
    static DHVAEConfig from_json(const nlohmann::json& j, DHVAEConfig base);

    static DHVAEConfig ih262();
    static DHVAEConfig ix56x6();
    /// Small desk-scale model over the given feature width.
    static DHVAEConfig toy(int feature_dim);

    friend bool operator==(const DHVAEConfig&, const DHVAEConfig&) = default;
};

inline constexpr double kLogVarMin = -30.0;
inline constexpr double kLogVarMax = 20.0;

/// [B, l, latent_dim] each.
struct GaussianPosterior {
    torch::Tensor mean;
    torch::Tensor log_variance;
};

enum class Person { kA, kB };

struct IndividualEncoding {
    GaussianPosterior posterior;
    torch::Tensor temporal;  // [B, N, hidden]
};

struct LatentTriple {
    torch::Tensor z_o, z_a, z_b;
    GaussianPosterior q_o, q_a, q_b;
    /// Frame-slot encoder outputs the posteriors were read from.
    torch::Tensor emb_a, emb_b;
};

struct DHVAEOutput {
    LatentTriple latents;
    torch::Tensor recon_a, recon_b;  // [B, N, D]
};

/// Frames -> 2l token slots read as (mean, log-variance), plus frame slots.
class PersonEncoderImpl : public torch::nn::Module {
public:
    explicit PersonEncoderImpl(const DHVAEConfig& cfg);
    IndividualEncoding forward(const torch::Tensor& x, const torch::Tensor& tokens);

private:
    int64_t l_;
    torch::nn::Linear input{nullptr}, head_mean{nullptr}, head_logvar{nullptr};
    torch::nn::ModuleList layers{nullptr};
    torch::Tensor pe_;
};
TORCH_MODULE(PersonEncoder);

/// Each branch queries the other; additive skip from the branch's own input.
class CoLayerImpl : public torch::nn::Module {
public:
    CoLayerImpl(const DHVAEConfig& cfg);
    std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& a, const torch::Tensor& b);

    /// Branch-a modules; aliases of the branch-b ones when shared.
    MultiheadAttention attn_a{nullptr}, attn_b{nullptr};

private:
    torch::Tensor branch(const torch::Tensor& self, const torch::Tensor& other, bool is_a);

    torch::nn::LayerNorm nq_a{nullptr}, nkv_a{nullptr}, nf_a{nullptr};
    torch::nn::LayerNorm nq_b{nullptr}, nkv_b{nullptr}, nf_b{nullptr};
    FeedForward ff_a{nullptr}, ff_b{nullptr};
};
TORCH_MODULE(CoLayer);

class CoTransformerImpl : public torch::nn::Module {
public:
    explicit CoTransformerImpl(const DHVAEConfig& cfg);

    /// Final branch outputs before pooling.
    std::pair<torch::Tensor, torch::Tensor> branches(const torch::Tensor& emb_a, const torch::Tensor& emb_b);

    /// Mean-pools both branches over time and maps [pool_a, pool_b, u_o] to the z_o posterior.
    GaussianPosterior forward(const torch::Tensor& emb_a, const torch::Tensor& emb_b, const torch::Tensor& u_o);

    torch::nn::ModuleList layers{nullptr};
    torch::nn::Linear pool_a{nullptr}, pool_b{nullptr}, token{nullptr}, out{nullptr};

private:
    int64_t latent_dim_;
};
TORCH_MODULE(CoTransformer);

/// Positional queries plus the person's latent tokens, cross-attending to the
/// interaction memory.
class PersonDecoderImpl : public torch::nn::Module {
public:
    explicit PersonDecoderImpl(const DHVAEConfig& cfg);
    torch::Tensor forward(const torch::Tensor& z, const torch::Tensor& memory, int64_t frames);

private:
    int64_t l_;
    torch::nn::Linear latent_in{nullptr}, output{nullptr};
    torch::nn::LayerNorm final_norm{nullptr};
    torch::nn::ModuleList layers{nullptr};
    torch::Tensor queries;
};
TORCH_MODULE(PersonDecoder);

class DHVAEImpl : public torch::nn::Module {
public:
    explicit DHVAEImpl(DHVAEConfig cfg);

    const DHVAEConfig& config() const { return cfg_; }

    /// x: [B, N, D] normalized features.
    IndividualEncoding encode_individual(const torch::Tensor& x, Person who);
    GaussianPosterior fuse(const torch::Tensor& emb_a, const torch::Tensor& emb_b);

    /// Posteriors of (z_o, z_a, z_b); latents hold posterior means.
    LatentTriple encode(const torch::Tensor& x_a, const torch::Tensor& x_b);

    /// Interaction memory of length `frames` from z_o.
    torch::Tensor interaction_memory(const torch::Tensor& z_o, int64_t frames);
    std::pair<torch::Tensor, torch::Tensor> decode(const torch::Tensor& z_o, const torch::Tensor& z_a,
                                                   const torch::Tensor& z_b, int64_t frames);

    /// Encodes, draws z from every posterior (means when `sample` is false) and decodes.
    DHVAEOutput forward(const torch::Tensor& x_a, const torch::Tensor& x_b, bool sample = true);

    torch::Tensor u_a, u_b, u_o;
    PersonEncoder encoder_a{nullptr}, encoder_b{nullptr};
    CoTransformer cotransformer{nullptr};
    torch::nn::Linear memory_in{nullptr};
    torch::nn::ModuleList interaction_layers{nullptr};
    torch::Tensor interaction_queries;
    PersonDecoder decoder_a{nullptr}, decoder_b{nullptr};

private:
    DHVAEConfig cfg_;
};
TORCH_MODULE(DHVAE);

/// z = mean + exp(log_variance / 2) * eps, eps from `generator` (global RNG when absent).
torch::Tensor reparameterize(const GaussianPosterior& p, std::optional<at::Generator> generator = std::nullopt);
torch::Tensor reparameterize(const GaussianPosterior& p, std::uint64_t seed);

/// KL to N(0, I): summed over tokens and channels, averaged over the batch.
torch::Tensor kl_diag_gaussian(const GaussianPosterior& p);

struct ElboTerms {
    torch::Tensor recon_a, recon_b, kl_a, kl_b, kl_o;
    torch::Tensor total;  // recon_a + recon_b + kl_weight * (kl_a + kl_b + kl_o)
};

/// Reconstruction is mean squared error on normalized features.
ElboTerms elbo_loss(const torch::Tensor& x_a, const torch::Tensor& x_b, const DHVAEOutput& out, double kl_weight);

struct DHVAELoss {
    ElboTerms elbo;
    torch::Tensor joint;    // L1 over joint positions, both persons
    torch::Tensor triplet;
    torch::Tensor total;    // elbo + joint_weight * joint + triplet_weight * triplet
};

DHVAELoss dhvae_total_loss(const ElboTerms& elbo, const torch::Tensor& joint_term, const torch::Tensor& triplet_term,
                           const DHVAEConfig& cfg);

/// Mean absolute difference of joint positions, summed over the two persons.
torch::Tensor joint_l1(const torch::Tensor& joints_a, const torch::Tensor& recon_joints_a,
                       const torch::Tensor& joints_b, const torch::Tensor& recon_joints_b);

}  // namespace duo::nn
