#include "duo/contrastive/contrastive.h"

#include <cmath>
#include <numbers>

#include "duo/error.h"
#include "duo/motion/kinematics.h"
#include "duo/nn/tensor.h"
#include "duo/physics/penetration.h"

namespace duo::contrastive {

void ContrastiveConfig::validate() const {
    if (!(sigma_c > 0.0 && sigma_c < sigma_u)) throw InvalidArgument("contrastive: need 0 < sigma_c < sigma_u");
    if (!(neg_low_mult > 0.0 && neg_low_mult < neg_high_mult))
        throw InvalidArgument("contrastive: need 0 < neg_low_mult < neg_high_mult");
    if (!(margin > 0.0)) throw InvalidArgument("contrastive: margin must be positive");
    if (!(truncation > 0.0)) throw InvalidArgument("contrastive: truncation must be positive");
}

nlohmann::json ContrastiveConfig::to_json() const {
    return {{"sigma_c", sigma_c},           {"sigma_u", sigma_u}, {"neg_low_mult", neg_low_mult},
            {"neg_high_mult", neg_high_mult}, {"margin", margin},   {"truncation", truncation}};
}

ContrastiveConfig ContrastiveConfig::from_json(const nlohmann::json& j, ContrastiveConfig c) {
    for (auto [key, field] : {std::pair{"sigma_c", &c.sigma_c}, std::pair{"sigma_u", &c.sigma_u},
                              std::pair{"neg_low_mult", &c.neg_low_mult}, std::pair{"neg_high_mult", &c.neg_high_mult},
                              std::pair{"margin", &c.margin}, std::pair{"truncation", &c.truncation}}) {
        if (j.contains(key)) *field = j.at(key).get<double>();
    }
    return c;
}

bool is_contact(const motion::InteractionPair& pair, const motion::SkeletonSpec& skeleton,
                const physics::GridParams& grid) {
    return physics::any_overlap(pair, skeleton, physics::BodyVolume::from_skeleton(skeleton), grid);
}

double truncated_normal(Rng& rng, double sigma, double bound) {
    for (;;) {
        const double x = rng.normal() * sigma;
        if (std::abs(x) <= bound) return x;
    }
}

Eigen::Vector2d sample_positive_delta(Rng& rng, bool contact, const ContrastiveConfig& cfg) {
    const double sigma = contact ? cfg.sigma_c : cfg.sigma_u;
    const double bound = cfg.truncation * sigma;
    const double x = truncated_normal(rng, sigma, bound);
    const double z = truncated_normal(rng, sigma, bound);
    return {x, z};
}

Eigen::Vector2d sample_negative_delta(Rng& rng, const ContrastiveConfig& cfg) {
    const double lo = cfg.neg_low_mult * cfg.sigma_u;
    const double hi = cfg.neg_high_mult * cfg.sigma_u;
    double mag;
    do {
        mag = std::abs(rng.normal()) * cfg.sigma_u;
    } while (mag < lo || mag > hi);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return {mag * std::cos(angle), mag * std::sin(angle)};
}

double triplet_loss(const Eigen::VectorXd& z, const Eigen::VectorXd& z_pos, const Eigen::VectorXd& z_neg,
                    double margin) {
    if (z.size() != z_pos.size() || z.size() != z_neg.size()) throw ShapeMismatch("triplet latents differ in size");
    return std::max(0.0, (z - z_pos).norm() - (z - z_neg).norm() + margin);
}

namespace {

torch::Tensor distances(const torch::Tensor& a, const torch::Tensor& b) {
    return (a - b).flatten(1).norm(2, 1);
}

}  // namespace

torch::Tensor triplet_loss(const torch::Tensor& z, const torch::Tensor& z_pos, const torch::Tensor& z_neg,
                           double margin) {
    if (z.sizes() != z_pos.sizes() || z.sizes() != z_neg.sizes()) throw ShapeMismatch("triplet latents differ in shape");
    return torch::relu(distances(z, z_pos) - distances(z, z_neg) + margin).mean();
}

Triplet build_triplet(const motion::InteractionPair& pair, bool contact, Rng& rng, const ContrastiveConfig& cfg) {
    Triplet t;
    t.positive_delta = sample_positive_delta(rng, contact, cfg);
    t.negative_delta = sample_negative_delta(rng, cfg);
    t.positive_b = motion::translate_ground(pair.person_b, t.positive_delta);
    t.negative_b = motion::translate_ground(pair.person_b, t.negative_delta);
    return t;
}

StepResult contrastive_step(nn::DHVAE& model, const nn::LatentTriple& anchor, const torch::Tensor& x_b_pos,
                            const torch::Tensor& x_b_neg, double margin) {
    const auto B = anchor.emb_a.size(0);
    auto both = model->encode_individual(torch::cat({x_b_pos, x_b_neg}, 0), nn::Person::kB).temporal;
    auto emb_a = torch::cat({anchor.emb_a, anchor.emb_a}, 0);
    auto z = model->fuse(emb_a, both).mean;
    auto z_pos = z.narrow(0, 0, B);
    auto z_neg = z.narrow(0, B, B);
    const auto& z_o = anchor.q_o.mean;
    StepResult r;
    r.d_pos = distances(z_o, z_pos);
    r.d_neg = distances(z_o, z_neg);
    r.loss = torch::relu(r.d_pos - r.d_neg + margin).mean();
    return r;
}

StepResult contrastive_step(nn::DHVAE& model, const motion::InteractionPair& pair,
                            const motion::SkeletonSpec& skeleton, const motion::NormStats& stats, Rng& rng,
                            const ContrastiveConfig& cfg) {
    const bool contact = is_contact(pair, skeleton);
    const auto t = build_triplet(pair, contact, rng, cfg);
    auto norm = [&](const motion::MotionSequence& s) {
        return nn::to_tensor(motion::znorm(s, stats).data).unsqueeze(0);
    };
    auto anchor = model->encode(norm(pair.person_a), norm(pair.person_b));
    return contrastive_step(model, anchor, norm(t.positive_b), norm(t.negative_b), cfg.margin);
}

}  // namespace duo::contrastive
