#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "torch_doctest.h"
#include "nn_support.h"

#include "duo/error.h"
#include "duo/nn/denoiser.h"

using namespace duo;
using namespace duo::nn;

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Straight-line re-implementation of the denoiser in Eigen, reading weights by name.
class NaiveDenoiser {
public:
    NaiveDenoiser(Denoiser& m) : cfg_(m->config()) {
        for (const auto& p : m->named_parameters()) {
            auto t = p.value().detach().to(torch::kDouble).contiguous();
            if (t.dim() == 1) t = t.view({-1, 1});
            Mat x(t.size(0), t.size(1));
            for (int64_t i = 0; i < t.size(0); ++i)
                for (int64_t j = 0; j < t.size(1); ++j) x(i, j) = t[i][j].item<double>();
            w_[p.key()] = x;
        }
    }

    // tokens: S x d, text: text_dim; returns S x d.
    Mat forward(const Mat& z, int t, const Vec& text, bool drop, const std::vector<int>& seg) const {
        const int S = static_cast<int>(z.rows());
        Mat h(S, cfg_.hidden_dim);
        std::array<int, 3> seen{0, 0, 0};
        for (int i = 0; i < S; ++i) {
            h.row(i) = linear("input", z.row(i).transpose()).transpose() + w_.at("segment_table").row(seg[i]) +
                       w_.at("position_table").row(seen[static_cast<std::size_t>(seg[i])]++);
        }
        Vec text_e = drop ? Vec(w_.at("null_text").col(0)) : linear("text_proj", text);
        Vec te = w_.at("time_table.weight").row(t).transpose();
        Vec c = text_e + linear("time_fc2", silu(linear("time_fc1", te)));

        const auto pairs = skip_pairs(cfg_.layers);
        std::vector<Mat> stored(pairs.size());
        for (int i = 0; i < cfg_.layers; ++i) {
            for (std::size_t k = 0; k < pairs.size(); ++k) {
                if (pairs[k].second != i) continue;
                Mat next(S, cfg_.hidden_dim);
                for (int r = 0; r < S; ++r) {
                    Vec cat(2 * cfg_.hidden_dim);
                    cat << h.row(r).transpose(), stored[k].row(r).transpose();
                    next.row(r) = linear("skip_proj." + std::to_string(k), cat).transpose();
                }
                h = next;
            }
            h = block(i, h, c);
            if (static_cast<std::size_t>(i) < pairs.size()) stored[static_cast<std::size_t>(i)] = h;
        }
        Mat out(S, cfg_.latent_dim);
        for (int r = 0; r < S; ++r) out.row(r) = linear("output", layer_norm(h.row(r).transpose())).transpose();
        return out;
    }

private:
    static Vec silu(const Vec& x) { return x.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); }); }
    static Vec gelu(const Vec& x) {
        return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
    }
    static Vec layer_norm(const Vec& x) {
        const double mu = x.mean();
        const double var = (x.array() - mu).square().mean();
        return (x.array() - mu) / std::sqrt(var + 1e-6);
    }
    Vec linear(const std::string& name, const Vec& x) const {
        return w_.at(name + ".weight") * x + w_.at(name + ".bias").col(0);
    }

    Mat block(int i, const Mat& x, const Vec& c) const {
        const std::string p = "blocks." + std::to_string(i) + ".";
        const int H = cfg_.hidden_dim, S = static_cast<int>(x.rows());
        const Vec mod = linear(p + "modulation", silu(c));
        auto chunk = [&](int k) { return Vec(mod.segment(k * H, H)); };
        const Vec shift1 = chunk(0), scale1 = chunk(1), gate1 = chunk(2);
        const Vec shift2 = chunk(3), scale2 = chunk(4), gate2 = chunk(5);

        Mat n(S, H);
        for (int r = 0; r < S; ++r)
            n.row(r) = (layer_norm(x.row(r).transpose()).array() * (1.0 + scale1.array()) + shift1.array()).transpose();
        Mat q(S, H), k(S, H), v(S, H);
        for (int r = 0; r < S; ++r) {
            q.row(r) = linear(p + "attn.q", n.row(r).transpose()).transpose();
            k.row(r) = linear(p + "attn.k", n.row(r).transpose()).transpose();
            v.row(r) = linear(p + "attn.v", n.row(r).transpose()).transpose();
        }
        const int heads = cfg_.heads, dh = H / heads;
        Mat ctx(S, H);
        for (int hd = 0; hd < heads; ++hd) {
            for (int r = 0; r < S; ++r) {
                Vec score(S);
                for (int s = 0; s < S; ++s) score[s] = q.row(r).segment(hd * dh, dh).dot(k.row(s).segment(hd * dh, dh)) / std::sqrt(double(dh));
                score = (score.array() - score.maxCoeff()).exp();
                score /= score.sum();
                Vec acc = Vec::Zero(dh);
                for (int s = 0; s < S; ++s) acc += score[s] * v.row(s).segment(hd * dh, dh).transpose();
                ctx.row(r).segment(hd * dh, dh) = acc.transpose();
            }
        }
        Mat y(S, H);
        for (int r = 0; r < S; ++r)
            y.row(r) = x.row(r) + (gate1.array() * linear(p + "attn.out", ctx.row(r).transpose()).array()).matrix().transpose();
        Mat out(S, H);
        for (int r = 0; r < S; ++r) {
            Vec m = layer_norm(y.row(r).transpose()).array() * (1.0 + scale2.array()) + shift2.array();
            Vec f = linear(p + "ff.fc2", gelu(linear(p + "ff.fc1", m)));
            out.row(r) = y.row(r) + (gate2.array() * f.array()).matrix().transpose();
        }
        return out;
    }

    DenoiserConfig cfg_;
    std::map<std::string, Mat> w_;
};

Mat to_mat(const torch::Tensor& t) {
    Mat m(t.size(0), t.size(1));
    for (int64_t i = 0; i < t.size(0); ++i)
        for (int64_t j = 0; j < t.size(1); ++j) m(i, j) = t[i][j].item<double>();
    return m;
}

}  // namespace

TEST_CASE("skip pairs") {
    const auto p = skip_pairs(13);
    REQUIRE(p.size() == 6);
    for (int k = 0; k < 6; ++k) {
        CHECK(p[static_cast<std::size_t>(k)].first == k);
        CHECK(p[static_cast<std::size_t>(k)].second == 12 - k);
    }
    CHECK(skip_pairs(1).empty());
    CHECK(skip_pairs(4).size() == 2);
}

TEST_CASE("token packing and scaling") {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(1);
    auto zo = torch::randn({2, 2, 3}, gen), za = torch::randn({2, 2, 3}, gen), zb = torch::randn({2, 2, 3}, gen);
    auto packed = pack_tokens(zo, za, zb);
    CHECK(packed.sizes() == torch::IntArrayRef({2, 6, 3}));
    auto parts = unpack_tokens(packed, 2);
    CHECK(torch::equal(parts[0], zo));
    CHECK(torch::equal(parts[2], zb));
    auto scaled = token_scale(packed, 2, 4.0);
    auto sp = unpack_tokens(scaled, 2);
    CHECK(torch::equal(sp[0], zo));
    CHECK(torch::allclose(sp[1], za / 4.0));
    CHECK(torch::allclose(token_unscale(scaled, 2, 4.0), packed));
    CHECK(torch::equal(canonical_segments(2), torch::tensor({0, 0, 1, 1, 2, 2}, torch::kLong)));
    CHECK_THROWS_AS(unpack_tokens(packed, 4), ShapeMismatch);
}

TEST_CASE("fresh denoiser predicts exactly zero") {
    torch::manual_seed(0);
    auto cfg = testing::tiny_denoiser(13);
    cfg.hidden_dim = 16;
    Denoiser m(cfg);
    m->eval();
    auto gen = at::make_generator<at::CPUGeneratorImpl>(2);
    torch::NoGradGuard g;
    for (int i = 0; i < 10; ++i) {
        auto z = torch::randn({3, 3, 4}, gen) * 5;
        auto t = torch::randint(1, cfg.T + 1, {3}, gen, torch::kLong);
        auto text = torch::randn({3, 4}, gen);
        auto drop = torch::rand({3}, gen) < 0.5;
        CHECK(m->forward(z, t, Condition{text, drop}).abs().max().item<double>() == 0.0);
    }
}

TEST_CASE("zero modulation makes every block the identity") {
    torch::manual_seed(1);
    AdaLNBlock b(8, 2, 16, 0.0);
    zero_linear(b->modulation);
    auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
    auto x = torch::randn({2, 5, 8}, gen), c = torch::randn({2, 8}, gen);
    CHECK(torch::equal(b->forward(x, c), x));
    CHECK_THROWS_AS(b->forward(x, torch::randn({2, 7}, gen)), ShapeMismatch);
}

TEST_CASE("segment and position encoding") {
    torch::manual_seed(2);
    auto cfg = testing::tiny_denoiser();
    cfg.latent_tokens = 2;
    Denoiser m(cfg);
    auto zero = torch::zeros({1, 6, cfg.hidden_dim});
    auto enc = m->segment_positional_encode(zero, canonical_segments(2))[0];
    // Same segment, different position: differ by the position rows only.
    CHECK(torch::allclose(enc[1] - enc[0], m->position_table[1] - m->position_table[0]));
    // Same position, different segment: differ by the segment rows only.
    CHECK(torch::allclose(enc[2] - enc[0], m->segment_table[1] - m->segment_table[0]));
    CHECK(torch::allclose(enc[4] - enc[2], m->segment_table[2] - m->segment_table[1]));
    // Permuting the token order with its ids permutes the encoding.
    auto ids = torch::tensor({2, 0, 1, 2, 0, 1}, torch::kLong);
    auto perm = m->segment_positional_encode(zero, ids)[0];
    CHECK(torch::allclose(perm[0], enc[4]));
    CHECK(torch::allclose(perm[3], enc[5]));
    CHECK_THROWS_AS(m->segment_positional_encode(zero, torch::tensor({0, 0, 0, 1, 1, 2}, torch::kLong)), ShapeMismatch);
    CHECK_THROWS_AS(m->segment_positional_encode(zero, torch::tensor({0, 0, 1, 1, 2, 3}, torch::kLong)), ShapeMismatch);
}

TEST_CASE("timestep embedding range") {
    torch::manual_seed(3);
    Denoiser m(testing::tiny_denoiser());
    CHECK(m->timestep_embed(torch::tensor({1, 20}, torch::kLong)).sizes() == torch::IntArrayRef({2, 8}));
    CHECK_THROWS_AS(m->timestep_embed(torch::tensor({0}, torch::kLong)), TimestepOutOfRange);
    CHECK_THROWS_AS(m->timestep_embed(torch::tensor({21}, torch::kLong)), TimestepOutOfRange);
}

TEST_CASE("dropped rows use the null text embedding") {
    torch::manual_seed(4);
    Denoiser m(testing::tiny_denoiser());
    auto text = torch::randn({2, 4});
    auto e = m->text_embed(Condition{text, torch::tensor({true, false})});
    CHECK(torch::equal(e[0], m->null_text));
    CHECK(torch::allclose(e[1], m->text_proj(text)[1]));
    CHECK(torch::equal(Condition::null(text).drop, torch::ones({2}, torch::kBool)));
}

TEST_CASE("denoiser matches a naive re-implementation") {
    torch::manual_seed(5);
    auto cfg = testing::tiny_denoiser(5);
    cfg.latent_tokens = 2;
    Denoiser m(cfg);
    m->to(torch::kDouble);
    testing::perturb(*m, 0.3, 6);
    m->eval();
    const NaiveDenoiser naive(m);
    auto gen = at::make_generator<at::CPUGeneratorImpl>(7);
    auto z = torch::randn({2, 6, 4}, gen, torch::kDouble);
    auto text = torch::randn({2, 4}, gen, torch::kDouble);
    auto t = torch::tensor({3, 17}, torch::kLong);
    auto drop = torch::tensor({false, true});
    torch::NoGradGuard g;
    auto out = m->forward(z, t, Condition{text, drop});
    const std::vector<int> seg{0, 0, 1, 1, 2, 2};
    double worst = 0.0;
    for (int b = 0; b < 2; ++b) {
        Vec tv(4);
        for (int i = 0; i < 4; ++i) tv[i] = text[b][i].item<double>();
        const Mat ref = naive.forward(to_mat(z[b]), static_cast<int>(t[b].item<int64_t>()), tv, drop[b].item<bool>(), seg);
        worst = std::max(worst, (ref - to_mat(out[b])).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("denoiser gradients match central differences") {
    torch::manual_seed(8);
    Denoiser m(testing::tiny_denoiser(3));
    m->to(torch::kDouble);
    testing::perturb(*m, 0.3, 9);
    CHECK(testing::parameter_count(*m) <= 10000);
    auto gen = at::make_generator<at::CPUGeneratorImpl>(10);
    auto z = torch::randn({2, 3, 4}, gen, torch::kDouble);
    auto text = torch::randn({2, 4}, gen, torch::kDouble);
    auto w = torch::randn({2, 3, 4}, gen, torch::kDouble);
    auto t = torch::tensor({4, 11}, torch::kLong);
    auto loss = [&] { return (m->forward(z, t, Condition::with_text(text)) * w).sum(); };
    const auto r = testing::check_gradients(*m, loss, 2, 11);
    INFO(r.worst);
    CHECK(r.max_rel < 1e-4);
    CHECK(r.max_abs_small <= r.floor);
    CHECK(r.small < r.checked / 2);
}

TEST_CASE("denoiser config") {
    DenoiserConfig c;
    c.validate();
    CHECK(DenoiserConfig::from_json(c.to_json()) == c);
    auto bad = c;
    bad.heads = 3;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = c;
    bad.token_scale = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    Denoiser big(c);
    CHECK(big->blocks->size() == 13);
    CHECK(big->skip_proj->size() == 6);
}
