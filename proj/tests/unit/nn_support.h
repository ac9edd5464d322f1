#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "duo/nn/denoiser.h"
#include "duo/nn/dhvae.h"
#include "duo/util/random.h"

namespace duo::testing {

/// Tiny DHVAE over arbitrary features, for exact and finite-difference checks.
inline nn::DHVAEConfig tiny_vae(int feature_dim = 6) {
    nn::DHVAEConfig c;
    c.feature_dim = feature_dim;
    c.latent_dim = 4;
    c.latent_tokens = 1;
    c.hidden_dim = 8;
    c.heads = 2;
    c.ff_dim = 16;
    c.dropout = 0.0;
    c.enc_layers_individual = 1;
    c.cotransformer_layers = 1;
    c.interaction_decoder_layers = 1;
    c.person_decoder_layers = 1;
    c.max_frames = 8;
    return c;
}

inline nn::DenoiserConfig tiny_denoiser(int layers = 3) {
    nn::DenoiserConfig c;
    c.latent_dim = 4;
    c.latent_tokens = 1;
    c.hidden_dim = 8;
    c.heads = 2;
    c.ff_dim = 16;
    c.layers = layers;
    c.dropout = 0.0;
    c.text_dim = 4;
    c.T = 20;
    return c;
}

inline int64_t parameter_count(const torch::nn::Module& m) {
    int64_t n = 0;
    for (const auto& p : m.parameters()) n += p.numel();
    return n;
}

/// Adds N(0, std^2) to every parameter so no zero-initialized path stays inert.
inline void perturb(torch::nn::Module& m, double std, std::uint64_t seed) {
    torch::NoGradGuard g;
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    for (auto& p : m.parameters()) p.add_(torch::randn(p.sizes(), gen, p.options()) * std);
}

struct GradReport {
    double max_rel = 0.0;      // over entries above the noise floor
    double max_abs_small = 0.0;  // |analytic - numeric| over entries below it
    double floor = 0.0;
    int checked = 0;
    int small = 0;
    std::string worst;  // parameter, analytic, numeric at max_rel
};

/// Central differences of `loss` against autograd for `per_tensor` random
/// entries of every parameter. Entries where both gradients are below
/// noise * max(1, |loss|) (e.g. key biases, which softmax ignores) are
/// compared in absolute terms only.
inline GradReport check_gradients(torch::nn::Module& m, const std::function<torch::Tensor()>& loss, int per_tensor,
                                  std::uint64_t seed, double h = 1e-5, double noise = 1e-7) {
    for (auto& p : m.parameters()) p.mutable_grad() = torch::Tensor();
    auto l0 = loss();
    l0.backward();
    Rng rng(seed);
    GradReport r;
    r.floor = noise * std::max(1.0, std::abs(l0.item<double>()));
    torch::NoGradGuard g;
    for (auto& item : m.named_parameters()) {
        const auto& name = item.key();
        auto& p = item.value();
        auto flat = p.view({-1});
        // Parameters the loss never touches have no grad tensor.
        auto grad = p.grad().defined() ? p.grad().view({-1}) : torch::zeros_like(flat);
        for (int k = 0; k < per_tensor; ++k) {
            const auto i = rng.integer(0, flat.numel() - 1);
            const double orig = flat[i].item<double>();
            flat[i] = orig + h;
            const double up = loss().item<double>();
            flat[i] = orig - h;
            const double down = loss().item<double>();
            flat[i] = orig;
            const double numeric = (up - down) / (2 * h);
            const double analytic = grad[i].item<double>();
            ++r.checked;
            if (std::max(std::abs(numeric), std::abs(analytic)) < r.floor) {
                ++r.small;
                r.max_abs_small = std::max(r.max_abs_small, std::abs(numeric - analytic));
                continue;
            }
            const double rel = std::abs(numeric - analytic) / std::max(std::abs(numeric), std::abs(analytic));
            if (rel > r.max_rel) {
                r.max_rel = rel;
                r.worst = name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic) + " numeric " +
                          std::to_string(numeric);
            }
        }
    }
    return r;
}

}  // namespace duo::testing
