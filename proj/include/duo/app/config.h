#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "duo/contrastive/contrastive.h"
#include "duo/motion/sequence.h"
#include "duo/motion/skeleton.h"
#include "duo/motion/synth.h"
#include "duo/nn/denoiser.h"
#include "duo/nn/dhvae.h"
#include "duo/nn/diffusion.h"

namespace duo::app {

struct DatasetParams {
    std::string skeleton = "toy";
    std::string layout = "ih";
    int count = 256;
    int frames = 32;
    /// Empty means all families, in their canonical order.
    std::vector<std::string> families;

    motion::SkeletonSpec make_skeleton() const;
    motion::MotionLayout make_layout() const;
    std::vector<motion::Family> family_list() const;
};

struct TrainParams {
    int epochs = 1;
    int batch_size = 16;
    double lr = 1e-4;
    double weight_decay = 0.01;
    double grad_clip = 1.0;
    /// Linear warm-up length in optimizer steps.
    int warmup_steps = 0;
    /// After warm-up, anneal to lr * min_lr_ratio along a half cosine.
    bool cosine_decay = false;
    double min_lr_ratio = 0.0;
};

/// Everything a run needs. The JSON form mirrors the fields; absent keys keep
/// their current values, so a file only needs the overrides.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "runs/toy";
    DatasetParams data;
    nn::DHVAEConfig vae;
    contrastive::ContrastiveConfig contrastive;
    nn::DiffusionConfig diffusion;
    nn::DenoiserConfig denoiser;
    TrainParams train_vae;
    TrainParams train_denoiser;

    /// Derives the feature width from the layout and the denoiser latent
    /// shape from the DHVAE, then validates every section. Throws InvalidArgument.
    void finalize();

    nlohmann::json to_json() const;
    /// Applies `j` on top of `base`.
    static RunConfig merge(const RunConfig& base, const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path, const RunConfig& base);

    /// Desk-scale defaults: 256 clips of 32 frames on the 11-joint toy skeleton.
    static RunConfig toy();
};

/// Output location: relative paths are placed under $DUO_OUTPUT_ROOT when set.
std::filesystem::path resolve_output(const std::filesystem::path& p);

}  // namespace duo::app
