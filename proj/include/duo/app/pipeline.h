#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>
#include "json.hpp"

#include "duo/app/config.h"
#include "duo/metrics/report.h"
#include "duo/motion/normalize.h"
#include "duo/motion/sequence.h"
#include "duo/motion/skeleton.h"
#include "duo/nn/denoiser.h"
#include "duo/nn/dhvae.h"
#include "duo/physics/penetration.h"

namespace duo::app {

using Logger = std::function<void(const std::string&)>;

/// Trained DHVAE with everything needed to encode and decode raw motion.
struct VaeBundle {
    nn::DHVAE model{nullptr};
    motion::NormStats stats;
    motion::MotionLayout layout;
    motion::SkeletonSpec skeleton;
    int frames = 0;
};

void save_vae(const std::filesystem::path& path, const VaeBundle& vae, const RunConfig& cfg);
/// Throws CheckpointMismatch for a non-DHVAE checkpoint.
VaeBundle load_vae(const std::filesystem::path& path);

struct DenoiserBundle {
    nn::Denoiser model{nullptr};
    nn::DiffusionConfig diffusion;
};

void save_denoiser(const std::filesystem::path& path, const DenoiserBundle& den);
DenoiserBundle load_denoiser(const std::filesystem::path& path);

/// Means over the optimizer steps of one epoch.
struct VaeEpochLog {
    int epoch = 0;
    double total = 0, recon_a = 0, recon_b = 0, kl_a = 0, kl_b = 0, kl_o = 0, joint = 0, triplet = 0;
    double d_pos = 0, d_neg = 0;
    double seconds = 0;

    nlohmann::json to_json() const;
};

struct VaeTrainOptions {
    /// Stop after this many optimizer steps (all epochs when unset).
    std::optional<int> max_steps;
    Logger log;
};

/// Optimizes the full DHVAE objective with the contrastive triplet term.
/// Normalization stats are fitted on `data`. Throws NonFiniteLoss with the
/// term breakdown when a step produces a non-finite loss.
VaeBundle train_vae(const motion::Dataset& data, const motion::SkeletonSpec& skeleton, const RunConfig& cfg,
                    std::vector<VaeEpochLog>* history = nullptr, const VaeTrainOptions& options = {});

/// Posterior means [M, 3l, d] ([z_o | z_a | z_b]) of every pair, unscaled.
torch::Tensor encode_latents(VaeBundle& vae, const motion::Dataset& data, int batch_size = 64);

/// Pooled std of the individual tokens over the pooled std of the global ones.
double compute_token_scale(const torch::Tensor& tokens, int latent_tokens);

/// [M, text_dim] caption embeddings.
torch::Tensor embed_captions(const std::vector<std::string>& captions, int text_dim);

struct DenoiserEpochLog {
    int epoch = 0;
    double loss = 0;
    double seconds = 0;
};

struct DenoiserTrainResult {
    DenoiserBundle denoiser;
    torch::Tensor latents;  // cached encoder means, unscaled
    double first_step_loss = 0;
    std::vector<DenoiserEpochLog> history;
};

/// Encodes the dataset once with the frozen DHVAE, sets s_l and trains the
/// noise predictor. Throws CheckpointMismatch when the configured latent
/// shape disagrees with the DHVAE.
DenoiserTrainResult train_denoiser(VaeBundle& vae, const motion::Dataset& data, const RunConfig& cfg,
                                   const VaeTrainOptions& options = {});

struct SampleRequest {
    std::vector<std::string> captions;  // one sample per caption
    std::uint64_t seed = 0;
    std::optional<double> cfg_scale;
    std::optional<int> steps;
};

/// Guided sampling, token unscaling, decoding and denormalization. Contact
/// annotation follows the caption's family when it can be recognized.
motion::Dataset sample_motions(VaeBundle& vae, DenoiserBundle& den, const SampleRequest& request);

struct EvalFlags {
    bool fidelity = true;
    bool physics = true;
    /// Count every generated clip in the contact ratio.
    bool contact_all = false;
    metrics::FidelityOptions fidelity_options;
    physics::PhysicsConfig physics_config;
};

/// JSON report with the requested sections only. Throws LayoutMismatch.
nlohmann::json evaluate(const motion::Dataset& generated, const motion::Dataset& reference,
                        const motion::MotionLayout& layout, const motion::SkeletonSpec& skeleton,
                        const EvalFlags& flags);

/// Mean per-joint position error in meters between two datasets of equal shape.
double mpjpe(const motion::Dataset& a, const motion::Dataset& b, const motion::SkeletonSpec& skeleton);

/// Encode with posterior means and decode, returning raw-space motion.
motion::Dataset reconstruct(VaeBundle& vae, const motion::Dataset& data);

}  // namespace duo::app
