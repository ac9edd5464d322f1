#include "duo/nn/diffusion.h"

#include <cmath>

#include "duo/error.h"

namespace duo::nn {

std::string schedule_kind_name(ScheduleKind k) { return k == ScheduleKind::kLinear ? "linear" : "scaled_linear"; }

ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "linear") return ScheduleKind::kLinear;
    if (s == "scaled_linear") return ScheduleKind::kScaledLinear;
    throw InvalidArgument("unknown schedule kind '" + s + "'");
}

NoiseSchedule NoiseSchedule::build(ScheduleKind kind, double beta_start, double beta_end, int T) {
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) || T < 1) {
        throw InvalidScheduleParams("schedule needs 0 < beta_start <= beta_end < 1 and T >= 1");
    }
    NoiseSchedule s;
    s.kind = kind;
    s.T = T;
    s.beta.resize(T);
    const double denom = T > 1 ? static_cast<double>(T - 1) : 1.0;
    const double r0 = std::sqrt(beta_start), r1 = std::sqrt(beta_end);
    for (int i = 0; i < T; ++i) {
        const double u = static_cast<double>(i) / denom;
        if (kind == ScheduleKind::kLinear) {
            s.beta[i] = beta_start + u * (beta_end - beta_start);
        } else {
            const double r = r0 + u * (r1 - r0);
            s.beta[i] = r * r;
        }
    }
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        s.alpha[i] = 1.0 - s.beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
    }
    return s;
}

double NoiseSchedule::alpha_bar_at(int t) const {
    if (t < 0 || t > T) throw TimestepOutOfRange("timestep " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
    return t == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(t - 1)];
}

torch::Tensor NoiseSchedule::alpha_bar_table() const {
    auto table = torch::empty({T + 1}, torch::kDouble);
    auto acc = table.accessor<double, 1>();
    acc[0] = 1.0;
    for (int t = 1; t <= T; ++t) acc[t] = alpha_bar[static_cast<std::size_t>(t - 1)];
    return table;
}

void DiffusionConfig::validate() const {
    NoiseSchedule::build(schedule, beta_start, beta_end, T);
    if (inference_steps < 1 || inference_steps > T) throw InvalidArgument("inference_steps must lie in [1, T]");
    if (!(uncond_ratio >= 0.0 && uncond_ratio <= 1.0)) throw InvalidArgument("uncond_ratio must lie in [0, 1]");
    if (!(eta >= 0.0)) throw InvalidArgument("eta must be >= 0");
    if (!std::isfinite(cfg_scale)) throw InvalidArgument("cfg_scale must be finite");
}

NoiseSchedule DiffusionConfig::make_schedule() const { return NoiseSchedule::build(schedule, beta_start, beta_end, T); }

nlohmann::json DiffusionConfig::to_json() const {
    return {{"schedule", schedule_kind_name(schedule)},
            {"beta_start", beta_start},
            {"beta_end", beta_end},
            {"T", T},
            {"inference_steps", inference_steps},
            {"cfg_scale", cfg_scale},
            {"uncond_ratio", uncond_ratio},
            {"eta", eta}};
}

DiffusionConfig DiffusionConfig::from_json(const nlohmann::json& j, DiffusionConfig c) {
    if (j.contains("schedule")) c.schedule = parse_schedule_kind(j.at("schedule").get<std::string>());
    if (j.contains("beta_start")) c.beta_start = j.at("beta_start").get<double>();
    if (j.contains("beta_end")) c.beta_end = j.at("beta_end").get<double>();
    if (j.contains("T")) c.T = j.at("T").get<int>();
    if (j.contains("inference_steps")) c.inference_steps = j.at("inference_steps").get<int>();
    if (j.contains("cfg_scale")) c.cfg_scale = j.at("cfg_scale").get<double>();
    if (j.contains("uncond_ratio")) c.uncond_ratio = j.at("uncond_ratio").get<double>();
    if (j.contains("eta")) c.eta = j.at("eta").get<double>();
    return c;
}

Condition Condition::with_text(const torch::Tensor& text) {
    return {text, torch::zeros({text.size(0)}, torch::kBool)};
}

Condition Condition::null(const torch::Tensor& text) { return {text, torch::ones({text.size(0)}, torch::kBool)}; }

namespace {

torch::Tensor broadcast_coeff(const torch::Tensor& per_batch, const torch::Tensor& like) {
    std::vector<int64_t> shape(static_cast<std::size_t>(like.dim()), 1);
    shape[0] = like.size(0);
    return per_batch.to(like.scalar_type()).view(shape);
}

}  // namespace

torch::Tensor q_sample(const torch::Tensor& z0, const torch::Tensor& t, const torch::Tensor& noise,
                       const NoiseSchedule& schedule) {
    if (z0.sizes() != noise.sizes()) throw ShapeMismatch("q_sample: noise shape differs from z0");
    if (t.dim() != 1 || t.size(0) != z0.size(0)) throw ShapeMismatch("q_sample: t must be [B]");
    if (t.min().item<int64_t>() < 1 || t.max().item<int64_t>() > schedule.T) {
        throw TimestepOutOfRange("q_sample: t outside [1, T]");
    }
    auto ab = schedule.alpha_bar_table().index_select(0, t.to(torch::kLong));
    return broadcast_coeff(ab.sqrt(), z0) * z0 + broadcast_coeff((1.0 - ab).sqrt(), z0) * noise;
}

torch::Tensor q_sample(const torch::Tensor& z0, int t, const torch::Tensor& noise, const NoiseSchedule& schedule) {
    if (z0.sizes() != noise.sizes()) throw ShapeMismatch("q_sample: noise shape differs from z0");
    if (t < 1 || t > schedule.T) throw TimestepOutOfRange("q_sample: t outside [1, T]");
    const double ab = schedule.alpha_bar_at(t);
    return std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * noise;
}

torch::Tensor training_loss(NoisePredictor& model, const torch::Tensor& z0, const torch::Tensor& text,
                            const DiffusionConfig& cfg, const NoiseSchedule& schedule, at::Generator& gen) {
    const auto B = z0.size(0);
    auto t = torch::randint(1, schedule.T + 1, {B}, gen, torch::kLong);
    auto noise = torch::randn(z0.sizes(), gen, z0.options());
    auto drop = torch::rand({B}, gen, torch::kDouble) < cfg.uncond_ratio;
    auto z_t = q_sample(z0, t, noise, schedule);
    auto eps = model.predict(z_t, t, Condition{text, drop});
    return (noise - eps).square().flatten(1).sum(1).mean();
}

torch::Tensor cfg_combine(const torch::Tensor& eps_cond, const torch::Tensor& eps_uncond, double omega) {
    if (eps_cond.sizes() != eps_uncond.sizes()) throw ShapeMismatch("cfg_combine: shapes differ");
    return (1.0 + omega) * eps_cond - omega * eps_uncond;
}

torch::Tensor ddim_step(const torch::Tensor& z_t, const torch::Tensor& eps, int t, int t_prev,
                        const NoiseSchedule& schedule, double eta, std::optional<at::Generator> gen) {
    if (!(t > t_prev && t_prev >= 0)) {
        throw InvalidTimestepOrder("ddim_step needs t > t_prev >= 0, got " + std::to_string(t) + " -> " +
                                   std::to_string(t_prev));
    }
    if (z_t.sizes() != eps.sizes()) throw ShapeMismatch("ddim_step: eps shape differs from z_t");
    const double ab_t = schedule.alpha_bar_at(t);
    const double ab_p = schedule.alpha_bar_at(t_prev);
    auto z0_hat = (z_t - std::sqrt(1.0 - ab_t) * eps) / std::sqrt(ab_t);
    const double sigma = eta * std::sqrt((1.0 - ab_p) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_p);
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_p - sigma * sigma));
    auto out = std::sqrt(ab_p) * z0_hat + dir * eps;
    if (sigma > 0.0) out = out + sigma * torch::randn(z_t.sizes(), gen, z_t.options());
    return out;
}

std::vector<int> ddim_timesteps(int T, int steps) {
    if (steps < 1 || steps > T) throw InvalidArgument("inference steps must lie in [1, T]");
    const int stride = T / steps;
    std::vector<int> ts(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) ts[static_cast<std::size_t>(i)] = T - i * stride;
    return ts;
}

torch::Tensor sample(NoisePredictor& model, const torch::Tensor& text, const DiffusionConfig& cfg,
                     const NoiseSchedule& schedule, std::uint64_t seed, at::IntArrayRef shape) {
    torch::NoGradGuard guard;
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    auto z = torch::randn(shape, gen, text.options());
    const auto B = z.size(0);
    const auto cond = Condition::with_text(text);
    const auto uncond = Condition::null(text);
    const auto ts = ddim_timesteps(schedule.T, cfg.inference_steps);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
        auto tt = torch::full({B}, t, torch::kLong);
        auto eps = model.predict(z, tt, cond);
        if (cfg.cfg_scale != 0.0) eps = cfg_combine(eps, model.predict(z, tt, uncond), cfg.cfg_scale);
        z = ddim_step(z, eps, t, t_prev, schedule, cfg.eta, gen);
    }
    return z;
}

}  // namespace duo::nn
