#include <cmath>

#include "torch_doctest.h"
#include "nn_support.h"

#include "duo/error.h"
#include "duo/nn/diffusion.h"

using namespace duo;
using namespace duo::nn;

namespace {

// Predicts the exact noise that separates z_t from a known clean sample.
class OraclePredictor final : public NoisePredictor {
public:
    OraclePredictor(torch::Tensor z0, const NoiseSchedule& s) : z0_(std::move(z0)), s_(s) {}
    torch::Tensor predict(const torch::Tensor& z_t, const torch::Tensor& t, const Condition&) override {
        const double ab = s_.alpha_bar_at(static_cast<int>(t[0].item<int64_t>()));
        ++calls;
        return (z_t - std::sqrt(ab) * z0_) / std::sqrt(1.0 - ab);
    }
    int calls = 0;

private:
    torch::Tensor z0_;
    const NoiseSchedule& s_;
};

// Optimal noise prediction when z_0 ~ N(0, sigma^2 I).
class GaussianPredictor final : public NoisePredictor {
public:
    GaussianPredictor(double sigma2, const NoiseSchedule& s) : sigma2_(sigma2), s_(s) {}
    torch::Tensor predict(const torch::Tensor& z_t, const torch::Tensor& t, const Condition&) override {
        const double ab = s_.alpha_bar_at(static_cast<int>(t[0].item<int64_t>()));
        return std::sqrt(1.0 - ab) * z_t / (ab * sigma2_ + 1.0 - ab);
    }

private:
    double sigma2_;
    const NoiseSchedule& s_;
};

// Returns the text embedding's first column broadcast, or zero when dropped.
class EchoPredictor final : public NoisePredictor {
public:
    torch::Tensor predict(const torch::Tensor& z_t, const torch::Tensor& t, const Condition& c) override {
        auto keep = (~c.drop.to(torch::kBool)).to(z_t.dtype()).view({-1, 1, 1});
        auto scale = t.to(z_t.dtype()).view({-1, 1, 1}) / 1000.0;
        return 0.1 * z_t * scale + keep * c.text.select(1, 0).view({-1, 1, 1});
    }
};

}  // namespace

TEST_CASE("scaled-linear schedule against frozen cumulative products") {
    const auto s = NoiseSchedule::build(ScheduleKind::kScaledLinear, 0.00085, 0.012, 1000);
    CHECK(s.alpha_bar_at(0) == 1.0);
    CHECK(s.alpha_bar_at(1) == doctest::Approx(0.99915).epsilon(1e-12));
    CHECK(s.alpha_bar_at(100) == doctest::Approx(0.8954627734950016).epsilon(1e-10));
    CHECK(s.alpha_bar_at(500) == doctest::Approx(0.27766965045646763).epsilon(1e-10));
    CHECK(s.alpha_bar_at(1000) == doctest::Approx(0.004660098513077238).epsilon(1e-10));
    // sqrt(beta) is affine in t.
    for (int t : {2, 300, 999}) {
        const double d1 = std::sqrt(s.beta[static_cast<std::size_t>(t)]) - std::sqrt(s.beta[static_cast<std::size_t>(t - 1)]);
        const double d0 = std::sqrt(s.beta[1]) - std::sqrt(s.beta[0]);
        CHECK(d1 == doctest::Approx(d0).epsilon(1e-9));
    }
    const auto lin = NoiseSchedule::build(ScheduleKind::kLinear, 0.00085, 0.012, 1000);
    CHECK(lin.alpha_bar_at(1000) == doctest::Approx(0.0015789629305514416).epsilon(1e-10));
    auto table = s.alpha_bar_table();
    CHECK(table.size(0) == 1001);
    CHECK(table[0].item<double>() == 1.0);
    CHECK(table[500].item<double>() == s.alpha_bar_at(500));
}

TEST_CASE("schedule invariants") {
    const auto s = NoiseSchedule::build(ScheduleKind::kScaledLinear, 0.00085, 0.012, 1000);
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
        CHECK(s.alpha_bar_at(t) > 0.0);
    }
    CHECK_THROWS_AS(s.alpha_bar_at(1001), TimestepOutOfRange);
    CHECK_THROWS_AS(s.alpha_bar_at(-1), TimestepOutOfRange);
    CHECK_THROWS_AS(NoiseSchedule::build(ScheduleKind::kLinear, 0.02, 0.01, 10), InvalidScheduleParams);
    CHECK_THROWS_AS(NoiseSchedule::build(ScheduleKind::kLinear, 0.0, 0.01, 10), InvalidScheduleParams);
    CHECK_THROWS_AS(NoiseSchedule::build(ScheduleKind::kLinear, 0.01, 1.0, 10), InvalidScheduleParams);
    CHECK_THROWS_AS(NoiseSchedule::build(ScheduleKind::kLinear, 0.01, 0.02, 0), InvalidScheduleParams);
    CHECK(parse_schedule_kind(schedule_kind_name(ScheduleKind::kLinear)) == ScheduleKind::kLinear);
    CHECK_THROWS_AS(parse_schedule_kind("cosine"), InvalidArgument);
}

TEST_CASE("q_sample moments") {
    const auto s = NoiseSchedule::build(ScheduleKind::kScaledLinear, 0.00085, 0.012, 1000);
    auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
    const int n = 20000;
    auto z0 = torch::full({n, 1, 1}, 0.8, torch::kDouble);
    for (int t : {1, 500, 1000}) {
        auto z = q_sample(z0, t, torch::randn({n, 1, 1}, gen, torch::kDouble), s);
        const double ab = s.alpha_bar_at(t);
        CHECK(z.mean().item<double>() == doctest::Approx(std::sqrt(ab) * 0.8).epsilon(0.05).scale(0.05));
        CHECK(z.var().item<double>() == doctest::Approx(1.0 - ab).epsilon(0.05));
    }
    // Per-row timesteps.
    auto noise = torch::ones({2, 1, 1}, torch::kDouble);
    auto z = q_sample(torch::zeros({2, 1, 1}, torch::kDouble), torch::tensor({1, 1000}, torch::kLong), noise, s);
    CHECK(z[0].item<double>() == doctest::Approx(std::sqrt(1 - s.alpha_bar_at(1))));
    CHECK(z[1].item<double>() == doctest::Approx(std::sqrt(1 - s.alpha_bar_at(1000))));
}

TEST_CASE("DDIM step identities") {
    const auto s = NoiseSchedule::build(ScheduleKind::kScaledLinear, 0.00085, 0.012, 1000);
    auto gen = at::make_generator<at::CPUGeneratorImpl>(4);
    auto z0 = torch::randn({3, 3, 5}, gen, torch::kDouble);
    auto eps = torch::randn({3, 3, 5}, gen, torch::kDouble);
    for (auto [t, tp] : {std::pair{1000, 980}, std::pair{500, 1}, std::pair{20, 0}, std::pair{1, 0}}) {
        auto z_t = q_sample(z0, t, eps, s);
        auto next = ddim_step(z_t, eps, t, tp, s, 0.0);
        auto expect = tp == 0 ? z0 : q_sample(z0, tp, eps, s);
        CHECK((next - expect).abs().max().item<double>() < 1e-10);
    }
    auto z_t = q_sample(z0, 700, eps, s);
    CHECK_THROWS_AS(ddim_step(z_t, eps, 500, 500, s, 0.0), InvalidTimestepOrder);
    CHECK_THROWS_AS(ddim_step(z_t, eps, 500, 600, s, 0.0), InvalidTimestepOrder);
    CHECK_THROWS_AS(ddim_step(z_t, eps.slice(0, 0, 1), 500, 400, s, 0.0), ShapeMismatch);

    // eta > 0 adds noise drawn from the supplied generator.
    auto g1 = at::make_generator<at::CPUGeneratorImpl>(9), g2 = at::make_generator<at::CPUGeneratorImpl>(9);
    auto a = ddim_step(z_t, eps, 700, 600, s, 1.0, g1), b = ddim_step(z_t, eps, 700, 600, s, 1.0, g2);
    CHECK(torch::equal(a, b));
    CHECK_FALSE(torch::allclose(a, ddim_step(z_t, eps, 700, 600, s, 0.0)));
}

TEST_CASE("DDIM timesteps") {
    const auto ts = ddim_timesteps(1000, 50);
    REQUIRE(ts.size() == 50);
    CHECK(ts.front() == 1000);
    CHECK(ts.back() == 20);
    for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i - 1] - ts[i] == 20);
    CHECK(ddim_timesteps(1000, 1000).back() == 1);
    CHECK_THROWS_AS(ddim_timesteps(10, 11), InvalidArgument);
    CHECK_THROWS_AS(ddim_timesteps(10, 0), InvalidArgument);
}

TEST_CASE("classifier-free guidance combination") {
    auto c = torch::tensor({1.0, 2.0}, torch::kDouble), u = torch::tensor({0.5, -1.0}, torch::kDouble);
    CHECK(torch::equal(cfg_combine(c, u, 0.0), c));
    auto g = cfg_combine(c, u, 3.5);
    CHECK(g[0].item<double>() == doctest::Approx(4.5 * 1.0 - 3.5 * 0.5));
    CHECK(g[1].item<double>() == doctest::Approx(4.5 * 2.0 + 3.5));
}

TEST_CASE("sampling: oracle recovery at any step count, determinism, guidance paths") {
    const auto s = NoiseSchedule::build(ScheduleKind::kScaledLinear, 0.00085, 0.012, 1000);
    auto z0 = torch::randn({2, 3, 4}, at::make_generator<at::CPUGeneratorImpl>(1), torch::kDouble);
    auto text = torch::zeros({2, 4}, torch::kDouble);
    DiffusionConfig cfg;
    cfg.cfg_scale = 0.0;
    for (int steps : {50, 1000}) {
        cfg.inference_steps = steps;
        OraclePredictor oracle(z0, s);
        auto out = sample(oracle, text, cfg, s, 5, {2, 3, 4});
        CHECK((out - z0).abs().max().item<double>() < 1e-8);
        CHECK(oracle.calls == steps);  // omega = 0 skips the unconditional pass
    }

    EchoPredictor echo;
    auto text2 = torch::tensor({{0.3, 0.0}, {-0.2, 0.0}}, torch::kDouble);
    cfg.inference_steps = 10;
    cfg.cfg_scale = 2.0;
    auto a = sample(echo, text2, cfg, s, 7, {2, 3, 4});
    CHECK(torch::equal(a, sample(echo, text2, cfg, s, 7, {2, 3, 4})));
    CHECK_FALSE(torch::equal(a, sample(echo, text2, cfg, s, 8, {2, 3, 4})));
    cfg.cfg_scale = 0.0;
    CHECK_FALSE(torch::equal(a, sample(echo, text2, cfg, s, 7, {2, 3, 4})));
}

TEST_CASE("sampling with the exact Gaussian-data predictor matches the closed-form variance") {
    const auto s = NoiseSchedule::build(ScheduleKind::kScaledLinear, 0.00085, 0.012, 1000);
    auto text = torch::zeros({4000, 4}, torch::kDouble);
    DiffusionConfig cfg;
    cfg.cfg_scale = 0.0;
    for (int steps : {50, 1000}) {
        cfg.inference_steps = steps;
        for (double sigma2 : {0.09, 0.36, 4.0}) {
            // Deterministic DDIM is linear here: z_0 = c z_T with c a product of per-step gains.
            double c = 1.0;
            for (int i = 0; i < steps; ++i) {
                const int t = 1000 - i * (1000 / steps), tp = i + 1 < steps ? t - 1000 / steps : 0;
                const double ab = s.alpha_bar_at(t), abp = s.alpha_bar_at(tp);
                const double e = std::sqrt(1.0 - ab) / (ab * sigma2 + 1.0 - ab);
                c *= std::sqrt(abp) * (1.0 - std::sqrt(1.0 - ab) * e) / std::sqrt(ab) + std::sqrt(1.0 - abp) * e;
            }
            GaussianPredictor g(sigma2, s);
            auto out = sample(g, text, cfg, s, 11, {4000, 1, 4});
            const double v = out.var(0).mean().item<double>();
            CAPTURE(steps);
            CAPTURE(sigma2);
            CHECK(v == doctest::Approx(c * c).epsilon(0.05));
            if (steps == 1000) CHECK(v == doctest::Approx(sigma2).epsilon(0.05));
        }
    }
}

TEST_CASE("training loss: reproducible and equal to E||eps||^2 for a zero predictor") {
    class Zero final : public NoisePredictor {
    public:
        torch::Tensor predict(const torch::Tensor& z_t, const torch::Tensor&, const Condition&) override {
            return torch::zeros_like(z_t);
        }
    } zero;
    const auto s = NoiseSchedule::build(ScheduleKind::kScaledLinear, 0.00085, 0.012, 1000);
    const DiffusionConfig cfg;
    auto z0 = torch::zeros({4000, 3, 8}, torch::kDouble);
    auto text = torch::zeros({4000, 4}, torch::kDouble);
    auto g1 = at::make_generator<at::CPUGeneratorImpl>(2), g2 = at::make_generator<at::CPUGeneratorImpl>(2);
    const double a = training_loss(zero, z0, text, cfg, s, g1).item<double>();
    CHECK(a == training_loss(zero, z0, text, cfg, s, g2).item<double>());
    CHECK(a == doctest::Approx(24.0).epsilon(0.02));
}

TEST_CASE("diffusion config") {
    DiffusionConfig c;
    c.validate();
    CHECK(DiffusionConfig::from_json(c.to_json()) == c);
    auto bad = c;
    bad.inference_steps = 2000;
    CHECK_THROWS(bad.validate());
    bad = c;
    bad.uncond_ratio = 1.5;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = c;
    bad.beta_end = 0.0001;
    CHECK_THROWS_AS(bad.validate(), InvalidScheduleParams);
}
