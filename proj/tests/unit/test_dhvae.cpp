#include <cmath>

#include "torch_doctest.h"
#include "nn_support.h"

#include "duo/error.h"
#include "duo/motion/kinematics.h"
#include "duo/motion/normalize.h"
#include "duo/motion/synth.h"
#include "duo/nn/joint_readout.h"
#include "duo/nn/tensor.h"

using namespace duo;
using namespace duo::nn;

namespace {

torch::Tensor randn(std::vector<int64_t> shape, std::uint64_t seed, torch::Dtype dtype = torch::kFloat) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    return torch::randn(shape, gen, torch::TensorOptions().dtype(dtype));
}

}  // namespace

TEST_CASE("DHVAE shapes on the toy layout") {
    torch::manual_seed(0);
    const int D = motion::MotionLayout{motion::LayoutKind::kIH, 11}.dim();
    auto cfg = DHVAEConfig::toy(D);
    cfg.hidden_dim = 32;
    cfg.ff_dim = 64;
    cfg.latent_dim = 8;
    cfg.latent_tokens = 2;
    DHVAE m(cfg);
    m->eval();
    auto x_a = randn({3, 10, D}, 1), x_b = randn({3, 10, D}, 2);
    auto out = m->forward(x_a, x_b);
    CHECK(out.recon_a.sizes() == x_a.sizes());
    CHECK(out.recon_b.sizes() == x_b.sizes());
    for (const auto* z : {&out.latents.z_o, &out.latents.z_a, &out.latents.z_b})
        CHECK(z->sizes() == torch::IntArrayRef({3, 2, 8}));
    CHECK(out.latents.emb_a.sizes() == torch::IntArrayRef({3, 10, 32}));
    CHECK_THROWS_AS(m->forward(x_a, randn({3, 9, D}, 3)), ShapeMismatch);
    CHECK_THROWS_AS(m->forward(randn({3, cfg.max_frames + 1, D}, 4), randn({3, cfg.max_frames + 1, D}, 5)),
                    ShapeMismatch);
}

TEST_CASE("shared branches reuse one module per role") {
    auto shared = testing::tiny_vae();
    auto separate = shared;
    separate.shared_branches = false;
    DHVAE a(shared), b(separate);
    CHECK(a->encoder_a.ptr() == a->encoder_b.ptr());
    CHECK(a->decoder_a.ptr() == a->decoder_b.ptr());
    CHECK(a->cotransformer->pool_a.ptr() == a->cotransformer->pool_b.ptr());
    CHECK(b->encoder_a.ptr() != b->encoder_b.ptr());
    CHECK(testing::parameter_count(*a) < testing::parameter_count(*b));
    // Person tokens stay distinct either way.
    CHECK_FALSE(torch::equal(a->u_a, a->u_b));
}

TEST_CASE("swapping the persons swaps the individual latents and keeps z_o") {
    torch::manual_seed(3);
    DHVAE m(testing::tiny_vae());
    m->eval();
    {
        torch::NoGradGuard g;
        m->u_b.copy_(m->u_a);
    }
    auto x_a = randn({2, 5, 6}, 10), x_b = randn({2, 5, 6}, 11);
    torch::NoGradGuard g;
    auto ab = m->encode(x_a, x_b);
    auto ba = m->encode(x_b, x_a);
    CHECK(torch::allclose(ab.z_a, ba.z_b, 1e-6, 1e-6));
    CHECK(torch::allclose(ab.z_b, ba.z_a, 1e-6, 1e-6));
    CHECK(torch::allclose(ab.z_o, ba.z_o, 1e-5, 1e-6));
    CHECK(torch::allclose(ab.q_o.log_variance, ba.q_o.log_variance, 1e-5, 1e-6));

    auto same = m->encode(x_a, x_a);
    CHECK(torch::equal(same.emb_a, same.emb_b));
}

TEST_CASE("fusion head starts at zero so z_o starts at the prior") {
    torch::manual_seed(4);
    DHVAE m(testing::tiny_vae());
    m->eval();
    torch::NoGradGuard g;
    auto t = m->encode(randn({2, 5, 6}, 1), randn({2, 5, 6}, 2));
    CHECK(t.q_o.mean.abs().max().item<double>() == 0.0);
    CHECK(t.q_o.log_variance.abs().max().item<double>() == 0.0);
}

TEST_CASE("log-variance is clamped") {
    torch::manual_seed(5);
    DHVAE m(testing::tiny_vae());
    m->eval();
    testing::perturb(*m, 50.0, 9);
    torch::NoGradGuard g;
    auto t = m->encode(randn({2, 5, 6}, 1) * 100, randn({2, 5, 6}, 2) * 100);
    for (const auto* q : {&t.q_o, &t.q_a, &t.q_b}) {
        CHECK(q->log_variance.min().item<double>() >= kLogVarMin);
        CHECK(q->log_variance.max().item<double>() <= kLogVarMax);
    }
}

TEST_CASE("reparameterize: moments, seeding and the deterministic path") {
    GaussianPosterior p{torch::full({20000, 1, 2}, 1.5, torch::kDouble),
                        torch::full({20000, 1, 2}, std::log(0.25), torch::kDouble)};
    auto z = reparameterize(p, std::uint64_t{7});
    CHECK(z.mean().item<double>() == doctest::Approx(1.5).epsilon(0.01));
    CHECK(z.var().item<double>() == doctest::Approx(0.25).epsilon(0.03));
    CHECK(torch::equal(z, reparameterize(p, std::uint64_t{7})));
    CHECK_FALSE(torch::equal(z, reparameterize(p, std::uint64_t{8})));

    torch::manual_seed(1);
    DHVAE m(testing::tiny_vae());
    m->eval();
    auto x_a = randn({2, 5, 6}, 1), x_b = randn({2, 5, 6}, 2);
    torch::NoGradGuard g;
    auto enc = m->encode(x_a, x_b);
    auto out = m->forward(x_a, x_b, /*sample=*/false);
    CHECK(torch::equal(out.latents.z_a, enc.q_a.mean));
    auto dec = m->decode(enc.z_o, enc.z_a, enc.z_b, 5);
    CHECK(torch::allclose(dec.first, out.recon_a));
}

TEST_CASE("KL to the standard normal") {
    auto zeros = torch::zeros({4, 2, 3}, torch::kDouble);
    CHECK(kl_diag_gaussian({zeros, zeros}).item<double>() == 0.0);

    // Closed form per coordinate: 0.5 (mu^2 + s^2 - 1 - log s^2), summed over
    // tokens and channels, averaged over the batch.
    auto mu = torch::tensor({0.5, -1.0, 2.0, 0.0}, torch::kDouble).view({2, 1, 2});
    auto lv = torch::tensor({0.0, std::log(2.0), std::log(0.5), 1.0}, torch::kDouble).view({2, 1, 2});
    const double expect = 0.5 * ((0.25 + 1 - 1 - 0) + (1 + 2 - 1 - std::log(2.0)) + (4 + 0.5 - 1 - std::log(0.5)) +
                                 (0 + std::exp(1.0) - 1 - 1.0)) / 2.0;
    CHECK(kl_diag_gaussian({mu, lv}).item<double>() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("KL agrees with a Monte-Carlo estimate") {
    Rng rng(21);
    for (int trial = 0; trial < 4; ++trial) {
        const int d = 3;
        auto mu = torch::empty({1, 1, d}, torch::kDouble), lv = torch::empty({1, 1, d}, torch::kDouble);
        for (int i = 0; i < d; ++i) {
            mu[0][0][i] = rng.uniform(-1.5, 1.5);
            lv[0][0][i] = rng.uniform(-1.5, 1.0);
        }
        const double analytic = kl_diag_gaussian({mu, lv}).item<double>();
        const int n = 200000;
        GaussianPosterior many{mu.expand({n, 1, d}), lv.expand({n, 1, d})};
        auto z = reparameterize(many, std::uint64_t(100 + trial));
        auto log_q = (-0.5 * ((z - many.mean).square() / many.log_variance.exp() + many.log_variance)).sum({1, 2});
        auto log_p = (-0.5 * z.square()).sum({1, 2});
        const double mc = (log_q - log_p).mean().item<double>();
        CHECK(mc == doctest::Approx(analytic).epsilon(0.02));
    }
}

TEST_CASE("ELBO and total loss equal their term breakdown") {
    torch::manual_seed(2);
    DHVAE m(testing::tiny_vae());
    m->to(torch::kDouble);
    testing::perturb(*m, 0.1, 3);
    auto x_a = randn({3, 5, 6}, 1, torch::kDouble), x_b = randn({3, 5, 6}, 2, torch::kDouble);
    auto out = m->forward(x_a, x_b);
    auto e = elbo_loss(x_a, x_b, out, 0.01);
    CHECK(e.recon_a.item<double>() == doctest::Approx((out.recon_a - x_a).square().mean().item<double>()));
    const double sum = e.recon_a.item<double>() + e.recon_b.item<double>() +
                       0.01 * (e.kl_a.item<double>() + e.kl_b.item<double>() + e.kl_o.item<double>());
    CHECK(std::abs(e.total.item<double>() - sum) < 1e-12);

    auto cfg = m->config();
    cfg.joint_weight = 2.0;
    cfg.triplet_weight = 0.5;
    auto joint = torch::tensor(0.3, torch::kDouble), trip = torch::tensor(0.7, torch::kDouble);
    auto total = dhvae_total_loss(e, joint, trip, cfg);
    CHECK(std::abs(total.total.item<double>() - (e.total.item<double>() + 0.6 + 0.35)) < 1e-12);
}

TEST_CASE("joint L1 sums the two persons") {
    auto a = torch::zeros({1, 2, 3, 3}), ra = torch::ones({1, 2, 3, 3});
    auto b = torch::zeros({1, 2, 3, 3}), rb = torch::full({1, 2, 3, 3}, -0.5);
    CHECK(joint_l1(a, ra, b, rb).item<double>() == doctest::Approx(1.5));
}

TEST_CASE("ELBO gradients match central differences") {
    torch::manual_seed(11);
    DHVAE m(testing::tiny_vae());
    m->to(torch::kDouble);
    testing::perturb(*m, 0.2, 12);
    CHECK(testing::parameter_count(*m) <= 10000);
    auto x_a = randn({2, 4, 6}, 1, torch::kDouble), x_b = randn({2, 4, 6}, 2, torch::kDouble);
    auto loss = [&] {
        torch::manual_seed(99);  // same reparameterization noise every call
        auto out = m->forward(x_a, x_b);
        return elbo_loss(x_a, x_b, out, 0.5).total;
    };
    const auto r = testing::check_gradients(*m, loss, 2, 5);
    CHECK(r.checked > 50);
    INFO(r.worst);
    CHECK(r.max_rel < 1e-4);
    CHECK(r.max_abs_small <= r.floor);
    CHECK(r.small < r.checked / 2);
}

TEST_CASE("config validation and JSON round trip") {
    auto c = DHVAEConfig::ix56x6();
    CHECK(DHVAEConfig::from_json(c.to_json()) == c);
    CHECK(DHVAEConfig::from_json(nlohmann::json{{"latent_dim", 32}}, c).latent_dim == 32);
    auto bad = c;
    bad.heads = 5;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = c;
    bad.latent_tokens = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    CHECK(DHVAEConfig::ih262().feature_dim == 262);
    CHECK(DHVAEConfig::ix56x6().feature_dim == 336);
}

TEST_CASE("joint readout matches the geometric joint positions") {
    const auto sk = motion::SkeletonSpec::toy();
    for (auto kind : {motion::LayoutKind::kIH, motion::LayoutKind::kIX}) {
        const motion::MotionLayout layout{kind, sk.joint_count()};
        const auto data = motion::synth_dataset(4, 4, sk, layout, {12, 12});
        const auto stats = motion::fit_norm_stats(data);
        const JointReadout readout(layout, sk, stats);
        const std::vector<int> idx{0, 1, 2, 3};
        const auto batch = make_batch(data, idx, stats);
        const auto pos = readout(batch.x_a);
        REQUIRE(pos.sizes() == torch::IntArrayRef({4, 12, sk.joint_count(), 3}));
        double worst = 0.0;
        for (int i = 0; i < 4; ++i) {
            const auto ref = motion::joint_positions(data[static_cast<std::size_t>(i)].person_a, sk);
            for (int f = 0; f < 12; ++f)
                for (int j = 0; j < sk.joint_count(); ++j)
                    for (int a = 0; a < 3; ++a)
                        worst = std::max(worst, std::abs(pos[i][f][j][a].item<double>() - ref(f, 3 * j + a)));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("6D decoding is orthonormal and keeps the first column direction") {
    auto r = randn({50, 6}, 3, torch::kDouble);
    auto R = rot6d_to_matrix(r);
    auto eye = torch::eye(3, torch::kDouble).expand({50, 3, 3});
    CHECK(torch::allclose(torch::matmul(R.transpose(1, 2), R), eye, 1e-10, 1e-10));
    CHECK(torch::allclose(torch::linalg_det(R), torch::ones({50}, torch::kDouble), 1e-10, 1e-10));
    auto c0 = R.select(2, 0);
    auto a = r.slice(1, 0, 3);
    CHECK(torch::allclose(c0, a / a.norm(2, 1, true), 1e-10, 1e-10));
}
