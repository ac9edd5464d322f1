#pragma once

#include <Eigen/Core>
#include <torch/torch.h>
#include "json.hpp"

#include "duo/motion/normalize.h"
#include "duo/motion/sequence.h"
#include "duo/motion/skeleton.h"
#include "duo/nn/dhvae.h"
#include "duo/physics/voxel.h"
#include "duo/util/random.h"

namespace duo::contrastive {

struct ContrastiveConfig {
    double sigma_c = 0.05;  // contact jitter, meters
    double sigma_u = 0.30;  // non-contact jitter, meters
    double neg_low_mult = 1.5;
    double neg_high_mult = 3.0;
    double margin = 1.0;
    /// Positive jitter is truncated at this many standard deviations.
    double truncation = 3.0;

    /// Throws InvalidArgument.
    void validate() const;

    nlohmann::json to_json() const;
    static ContrastiveConfig from_json(const nlohmann::json& j) { return from_json(j, ContrastiveConfig{}); }
    static ContrastiveConfig from_json(const nlohmann::json& j, ContrastiveConfig base);

    friend bool operator==(const ContrastiveConfig&, const ContrastiveConfig&) = default;
};

/// Any frame whose voxelized bodies share at least one voxel.
bool is_contact(const motion::InteractionPair& pair, const motion::SkeletonSpec& skeleton,
                const physics::GridParams& grid = {});

/// N(0, sigma^2) conditioned on |x| <= bound, by rejection.
double truncated_normal(Rng& rng, double sigma, double bound);

/// Per-axis truncated normal on the ground plane with sigma_c or sigma_u.
Eigen::Vector2d sample_positive_delta(Rng& rng, bool contact, const ContrastiveConfig& cfg);

/// Uniform direction; magnitude from the half-normal N(0, sigma_u^2)
/// conditioned to [neg_low_mult, neg_high_mult] * sigma_u.
Eigen::Vector2d sample_negative_delta(Rng& rng, const ContrastiveConfig& cfg);

/// max(0, d(z, z+) - d(z, z-) + m) with Euclidean d over flattened latents.
double triplet_loss(const Eigen::VectorXd& z, const Eigen::VectorXd& z_pos, const Eigen::VectorXd& z_neg, double margin);

/// Batched form over [B, ...] latents, averaged over the batch.
torch::Tensor triplet_loss(const torch::Tensor& z, const torch::Tensor& z_pos, const torch::Tensor& z_neg,
                           double margin);

/// Person b moved by a small jitter (positive) and by an implausible shift (negative).
struct Triplet {
    motion::MotionSequence positive_b;
    motion::MotionSequence negative_b;
    Eigen::Vector2d positive_delta;
    Eigen::Vector2d negative_delta;
};
Triplet build_triplet(const motion::InteractionPair& pair, bool contact, Rng& rng, const ContrastiveConfig& cfg);

struct StepResult {
    torch::Tensor loss;   // scalar, batch mean
    torch::Tensor d_pos;  // [B]
    torch::Tensor d_neg;  // [B]
};

/// Triplet term on posterior-mean z_o. The anchor's person-a embedding is
/// reused for the positive and negative pairs.
StepResult contrastive_step(nn::DHVAE& model, const nn::LatentTriple& anchor, const torch::Tensor& x_b_pos,
                            const torch::Tensor& x_b_neg, double margin);

/// Whole procedure for one raw pair: contact test, translations, encoding.
StepResult contrastive_step(nn::DHVAE& model, const motion::InteractionPair& pair,
                            const motion::SkeletonSpec& skeleton, const motion::NormStats& stats, Rng& rng,
                            const ContrastiveConfig& cfg);

}  // namespace duo::contrastive
