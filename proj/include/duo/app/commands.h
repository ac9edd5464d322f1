#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "duo/app/config.h"
#include "duo/app/pipeline.h"

namespace duo::app {

namespace fs = std::filesystem;

/// Synthesizes the configured dataset. The summary holds count, layout,
/// frames and the fraction of clips whose bodies touch.
nlohmann::json cmd_synth(const RunConfig& cfg, const fs::path& out);

/// Trains the DHVAE on a dataset file. Per-epoch losses go to `log` and, when
/// `history_path` is set, to a JSON-lines file.
nlohmann::json cmd_train_vae(const RunConfig& cfg, const fs::path& dataset, const fs::path& out,
                             const std::optional<fs::path>& history_path = std::nullopt, const Logger& log = {});

/// Trains the denoiser against a frozen DHVAE checkpoint. The encoded latents
/// are written next to the checkpoint as `<out>.latents` unless a path is given.
nlohmann::json cmd_train_denoiser(const RunConfig& cfg, const fs::path& dataset, const fs::path& vae_checkpoint,
                                  const fs::path& out, const std::optional<fs::path>& latents_path = std::nullopt,
                                  const Logger& log = {});

/// Writes a [M, 3l, d] latent cache in the checkpoint container.
void save_latents(const fs::path& path, const torch::Tensor& latents, int latent_tokens);
torch::Tensor load_latents(const fs::path& path);

/// `count` captions cycling through the family's caption templates.
std::vector<std::string> family_captions(motion::Family family, int count);

struct SampleArgs {
    fs::path vae;
    fs::path denoiser;
    std::vector<std::string> captions;
    std::uint64_t seed = 0;
    std::optional<double> cfg_scale;
    std::optional<int> steps;
    fs::path out;
    std::optional<fs::path> plot;
};

nlohmann::json cmd_sample(const SampleArgs& args);

/// File name used for one guidance scale of a sweep, e.g. "omega_3.5.duo".
std::string sweep_file_name(double omega);
std::optional<double> parse_sweep_file_name(const std::string& name);

/// One sample file per guidance scale in `dir`, all with the same seed.
nlohmann::json cmd_sample_sweep(const SampleArgs& args, const std::vector<double>& omegas, const fs::path& dir);

struct EvalArgs {
    fs::path generated;
    fs::path reference;
    EvalFlags flags;
    /// Used when neither file carries a skeleton.
    std::optional<std::string> skeleton;
    std::optional<fs::path> out;
    /// Evaluates every sweep file in the directory and plots metric vs scale.
    std::optional<fs::path> sweep_dir;
    std::optional<fs::path> plot;
};

nlohmann::json cmd_eval(const EvalArgs& args);

void cmd_plot(const fs::path& input, const fs::path& out, int max_pairs, const std::optional<std::string>& skeleton);

}  // namespace duo::app
