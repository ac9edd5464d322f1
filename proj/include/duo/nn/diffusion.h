#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>
#include "json.hpp"

namespace duo::nn {

enum class ScheduleKind { kLinear, kScaledLinear };

std::string schedule_kind_name(ScheduleKind k);
ScheduleKind parse_schedule_kind(const std::string& s);

/// Timesteps are 1-based: beta[0] belongs to t = 1, and alpha_bar(0) := 1.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::kScaledLinear;
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    /// Throws InvalidScheduleParams unless 0 < beta_start <= beta_end < 1 and T >= 1.
    static NoiseSchedule build(ScheduleKind kind, double beta_start, double beta_end, int T);

    /// t in [0, T]; throws TimestepOutOfRange.
    double alpha_bar_at(int t) const;
    /// [T + 1] double table with entry 0 equal to 1.
    torch::Tensor alpha_bar_table() const;
};

struct DiffusionConfig {
    ScheduleKind schedule = ScheduleKind::kScaledLinear;
    double beta_start = 0.00085;
    double beta_end = 0.012;
    int T = 1000;
    int inference_steps = 50;
    double cfg_scale = 3.5;
    double uncond_ratio = 0.1;
    double eta = 0.0;

    /// Throws InvalidArgument / InvalidScheduleParams.
    void validate() const;
    NoiseSchedule make_schedule() const;

    nlohmann::json to_json() const;
    static DiffusionConfig from_json(const nlohmann::json& j) { return from_json(j, DiffusionConfig{}); }
    static DiffusionConfig from_json(const nlohmann::json& j, DiffusionConfig base);

    friend bool operator==(const DiffusionConfig&, const DiffusionConfig&) = default;
};

/// Text condition per batch element; rows with drop set use the null embedding.
struct Condition {
    torch::Tensor text;  // [B, text_dim]
    torch::Tensor drop;  // [B] bool

    static Condition with_text(const torch::Tensor& text);
    static Condition null(const torch::Tensor& text);
};

/// eps_theta(z_t, t, c) over [B, S, d] token sets; t is a [B] int64 tensor.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual torch::Tensor predict(const torch::Tensor& z_t, const torch::Tensor& t, const Condition& c) = 0;
};

/// sqrt(ab_t) z0 + sqrt(1 - ab_t) noise, t broadcast over the batch.
torch::Tensor q_sample(const torch::Tensor& z0, const torch::Tensor& t, const torch::Tensor& noise,
                       const NoiseSchedule& schedule);
torch::Tensor q_sample(const torch::Tensor& z0, int t, const torch::Tensor& noise, const NoiseSchedule& schedule);

/// Uniform t, Gaussian noise and condition dropout, all drawn from `gen`.
/// Returns the batch mean of ||eps - eps_hat||^2 summed over tokens and channels.
torch::Tensor training_loss(NoisePredictor& model, const torch::Tensor& z0, const torch::Tensor& text,
                            const DiffusionConfig& cfg, const NoiseSchedule& schedule, at::Generator& gen);

/// (1 + omega) eps_cond - omega eps_uncond.
torch::Tensor cfg_combine(const torch::Tensor& eps_cond, const torch::Tensor& eps_uncond, double omega);

/// One DDIM update from t to t_prev (t_prev may be 0). `gen` supplies the
/// fresh noise when eta > 0.
torch::Tensor ddim_step(const torch::Tensor& z_t, const torch::Tensor& eps, int t, int t_prev,
                        const NoiseSchedule& schedule, double eta, std::optional<at::Generator> gen = std::nullopt);

/// Descending uniform stride starting at T; the step after the last entry goes to 0.
std::vector<int> ddim_timesteps(int T, int steps);

/// Guided DDIM from N(0, I) tokens of `shape`; returns tokens in the
/// denoiser's (scaled) space.
torch::Tensor sample(NoisePredictor& model, const torch::Tensor& text, const DiffusionConfig& cfg,
                     const NoiseSchedule& schedule, std::uint64_t seed, at::IntArrayRef shape);

}  // namespace duo::nn
