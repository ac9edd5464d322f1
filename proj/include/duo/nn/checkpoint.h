#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <torch/torch.h>
#include "json.hpp"

namespace duo::nn {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// "DUOCKPT\0", u32 version, u64 header length, JSON header, then every
/// tensor as little-endian float32 in header order.
struct Checkpoint {
    std::string kind;       // "dhvae" or "denoiser"
    nlohmann::json config;  // model config echo
    nlohmann::json extras;  // normalization stats, s_l, layout, ...
    std::map<std::string, torch::Tensor> tensors;
};

/// Parameters and buffers of `module` under their qualified names.
Checkpoint capture(const torch::nn::Module& module, std::string kind, nlohmann::json config, nlohmann::json extras);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws FormatVersionMismatch for a foreign or newer file, IoError for a
/// damaged one.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every tensor into `module`, converting to its dtype. Missing,
/// extra or differently shaped entries throw CheckpointMismatch.
void restore(torch::nn::Module& module, const Checkpoint& ckpt);

/// Throws CheckpointMismatch unless the kind matches.
void expect_kind(const Checkpoint& ckpt, const std::string& kind);

}  // namespace duo::nn
