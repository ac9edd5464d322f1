#include "duo/app/pipeline.h"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "duo/contrastive/contrastive.h"
#include "duo/error.h"
#include "duo/metrics/extractor.h"
#include "duo/motion/kinematics.h"
#include "duo/motion/synth.h"
#include "duo/motion/text.h"
#include "duo/nn/checkpoint.h"
#include "duo/nn/joint_readout.h"
#include "duo/nn/tensor.h"
#include "duo/util/random.h"

namespace duo::app {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void log_line(const Logger& log, const std::string& s) {
    if (log) log(s);
}

int uniform_frames(const motion::Dataset& data) {
    if (data.empty()) throw InsufficientSamples("empty dataset");
    const int n = data.front().frames();
    for (const auto& p : data) {
        if (p.frames() != n) throw InvalidArgument("training needs clips of one length");
    }
    return n;
}

void set_lr(torch::optim::AdamW& opt, double lr) {
    for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamWOptions&>(g.options()).lr(lr);
}

double scheduled_lr(const TrainParams& t, int step, int total_steps) {
    if (t.warmup_steps > 0 && step < t.warmup_steps)
        return t.lr * static_cast<double>(step + 1) / static_cast<double>(t.warmup_steps);
    if (!t.cosine_decay || total_steps <= t.warmup_steps) return t.lr;
    const double progress = static_cast<double>(step - t.warmup_steps) / static_cast<double>(total_steps - t.warmup_steps);
    const double c = 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
    return t.lr * (t.min_lr_ratio + (1.0 - t.min_lr_ratio) * c);
}

int total_steps(const TrainParams& t, std::size_t count) {
    const int per_epoch = static_cast<int>((count + static_cast<std::size_t>(t.batch_size) - 1) / static_cast<std::size_t>(t.batch_size));
    return per_epoch * t.epochs;
}

std::vector<std::vector<int>> epoch_batches(Rng& rng, int count, int batch_size) {
    const auto perm = rng.permutation(static_cast<std::size_t>(count));
    std::vector<std::vector<int>> batches;
    for (std::size_t i = 0; i < perm.size(); i += static_cast<std::size_t>(batch_size)) {
        std::vector<int> b;
        for (std::size_t k = i; k < std::min(perm.size(), i + static_cast<std::size_t>(batch_size)); ++k)
            b.push_back(static_cast<int>(perm[k]));
        batches.push_back(std::move(b));
    }
    return batches;
}

motion::MotionSequence raw_sequence(const torch::Tensor& normalized, const motion::MotionLayout& layout,
                                    const motion::NormStats& stats) {
    return motion::denorm(motion::MotionSequence(layout, nn::to_frames(normalized)), stats);
}

}  // namespace

void save_vae(const std::filesystem::path& path, const VaeBundle& vae, const RunConfig& cfg) {
    nlohmann::json extras = {{"stats", vae.stats.to_json()},
                             {"layout", vae.layout.to_json()},
                             {"skeleton", vae.skeleton.to_json()},
                             {"frames", vae.frames},
                             {"run", cfg.to_json()}};
    nn::save_checkpoint(path, nn::capture(*vae.model, "dhvae", vae.model->config().to_json(), extras));
}

VaeBundle load_vae(const std::filesystem::path& path) {
    const auto ckpt = nn::load_checkpoint(path);
    nn::expect_kind(ckpt, "dhvae");
    VaeBundle b;
    try {
        b.model = nn::DHVAE(nn::DHVAEConfig::from_json(ckpt.config));
        b.stats = motion::NormStats::from_json(ckpt.extras.at("stats"));
        b.layout = motion::MotionLayout::from_json(ckpt.extras.at("layout"));
        b.skeleton = motion::SkeletonSpec::from_json(ckpt.extras.at("skeleton"));
        b.frames = ckpt.extras.at("frames").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointMismatch(std::string("DHVAE checkpoint metadata is incomplete: ") + e.what());
    }
    if (b.layout.dim() != b.model->config().feature_dim) throw CheckpointMismatch("layout width differs from model input");
    nn::restore(*b.model, ckpt);
    b.model->eval();
    return b;
}

void save_denoiser(const std::filesystem::path& path, const DenoiserBundle& den) {
    nlohmann::json extras = {{"diffusion", den.diffusion.to_json()}};
    nn::save_checkpoint(path, nn::capture(*den.model, "denoiser", den.model->config().to_json(), extras));
}

DenoiserBundle load_denoiser(const std::filesystem::path& path) {
    const auto ckpt = nn::load_checkpoint(path);
    nn::expect_kind(ckpt, "denoiser");
    DenoiserBundle d;
    try {
        d.model = nn::Denoiser(nn::DenoiserConfig::from_json(ckpt.config));
        d.diffusion = nn::DiffusionConfig::from_json(ckpt.extras.at("diffusion"));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointMismatch(std::string("denoiser checkpoint metadata is incomplete: ") + e.what());
    }
    nn::restore(*d.model, ckpt);
    d.model->eval();
    return d;
}

nlohmann::json VaeEpochLog::to_json() const {
    return {{"epoch", epoch},     {"total", total}, {"recon_a", recon_a}, {"recon_b", recon_b},
            {"kl_a", kl_a},       {"kl_b", kl_b},   {"kl_o", kl_o},       {"joint", joint},
            {"triplet", triplet}, {"d_pos", d_pos}, {"d_neg", d_neg},     {"seconds", seconds}};
}

VaeBundle train_vae(const motion::Dataset& data, const motion::SkeletonSpec& skeleton, const RunConfig& cfg,
                    std::vector<VaeEpochLog>* history, const VaeTrainOptions& options) {
    const int frames = uniform_frames(data);
    VaeBundle b;
    b.layout = data.front().person_a.layout;
    b.skeleton = skeleton;
    b.frames = frames;
    b.stats = motion::fit_norm_stats(data);
    if (b.layout.dim() != cfg.vae.feature_dim) throw ShapeMismatch("dataset width differs from dhvae.feature_dim");

    torch::manual_seed(cfg.seed);
    b.model = nn::DHVAE(cfg.vae);
    b.model->train();
    const nn::JointReadout readout(b.layout, skeleton, b.stats);

    const bool use_triplet = cfg.vae.triplet_weight > 0.0;
    std::vector<char> contact(data.size(), 0);
    if (use_triplet) {
        for (std::size_t i = 0; i < data.size(); ++i) contact[i] = contrastive::is_contact(data[i], skeleton);
    }

    torch::optim::AdamW opt(b.model->parameters(),
                            torch::optim::AdamWOptions(cfg.train_vae.lr).weight_decay(cfg.train_vae.weight_decay));
    Rng rng(cfg.seed ^ 0x7a3e5c11u);
    int step = 0;
    const int count = static_cast<int>(data.size());
    for (int epoch = 1; epoch <= cfg.train_vae.epochs; ++epoch) {
        if (options.max_steps && step >= *options.max_steps) break;
        const auto t0 = Clock::now();
        VaeEpochLog log;
        log.epoch = epoch;
        int steps_this_epoch = 0;
        for (const auto& idx : epoch_batches(rng, count, cfg.train_vae.batch_size)) {
            if (options.max_steps && step >= *options.max_steps) break;
            set_lr(opt, scheduled_lr(cfg.train_vae, step, total_steps(cfg.train_vae, data.size())));
            const auto batch = nn::make_batch(data, idx, b.stats);
            auto out = b.model->forward(batch.x_a, batch.x_b);
            auto elbo = nn::elbo_loss(batch.x_a, batch.x_b, out, cfg.vae.kl_weight);
            auto joint = nn::joint_l1(readout(batch.x_a), readout(out.recon_a), readout(batch.x_b), readout(out.recon_b));

            auto triplet = torch::zeros({}, batch.x_a.options());
            double d_pos = 0.0, d_neg = 0.0;
            if (use_triplet) {
                std::vector<motion::MotionSequence> pos, neg;
                for (int i : idx) {
                    auto t = contrastive::build_triplet(data[static_cast<std::size_t>(i)], contact[static_cast<std::size_t>(i)],
                                                        rng, cfg.contrastive);
                    pos.push_back(std::move(t.positive_b));
                    neg.push_back(std::move(t.negative_b));
                }
                std::vector<const motion::MotionSequence*> pp, nn_;
                for (std::size_t k = 0; k < pos.size(); ++k) {
                    pp.push_back(&pos[k]);
                    nn_.push_back(&neg[k]);
                }
                auto r = contrastive::contrastive_step(b.model, out.latents, nn::normalized_batch(pp, b.stats),
                                                       nn::normalized_batch(nn_, b.stats), cfg.contrastive.margin);
                triplet = r.loss;
                d_pos = r.d_pos.mean().item<double>();
                d_neg = r.d_neg.mean().item<double>();
            }
            auto loss = nn::dhvae_total_loss(elbo, joint, triplet, cfg.vae);
            const double total = loss.total.item<double>();
            if (!std::isfinite(total)) {
                std::ostringstream msg;
                msg << "non-finite DHVAE loss at step " << step << ": recon_a=" << elbo.recon_a.item<double>()
                    << " recon_b=" << elbo.recon_b.item<double>() << " kl_a=" << elbo.kl_a.item<double>()
                    << " kl_b=" << elbo.kl_b.item<double>() << " kl_o=" << elbo.kl_o.item<double>()
                    << " joint=" << joint.item<double>() << " triplet=" << triplet.item<double>();
                throw NonFiniteLoss(msg.str());
            }
            opt.zero_grad();
            loss.total.backward();
            if (cfg.train_vae.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(b.model->parameters(), cfg.train_vae.grad_clip);
            opt.step();
            ++step;
            ++steps_this_epoch;

            log.total += total;
            log.recon_a += elbo.recon_a.item<double>();
            log.recon_b += elbo.recon_b.item<double>();
            log.kl_a += elbo.kl_a.item<double>();
            log.kl_b += elbo.kl_b.item<double>();
            log.kl_o += elbo.kl_o.item<double>();
            log.joint += joint.item<double>();
            log.triplet += triplet.item<double>();
            log.d_pos += d_pos;
            log.d_neg += d_neg;
        }
        if (steps_this_epoch == 0) break;
        const double n = steps_this_epoch;
        for (double* f : {&log.total, &log.recon_a, &log.recon_b, &log.kl_a, &log.kl_b, &log.kl_o, &log.joint,
                          &log.triplet, &log.d_pos, &log.d_neg})
            *f /= n;
        log.seconds = seconds_since(t0);
        log_line(options.log, "vae epoch " + std::to_string(epoch) + " " + log.to_json().dump());
        if (history) history->push_back(log);
    }
    b.model->eval();
    return b;
}

torch::Tensor encode_latents(VaeBundle& vae, const motion::Dataset& data, int batch_size) {
    torch::NoGradGuard guard;
    vae.model->eval();
    std::vector<torch::Tensor> parts;
    for (std::size_t i = 0; i < data.size(); i += static_cast<std::size_t>(batch_size)) {
        std::vector<int> idx;
        for (std::size_t k = i; k < std::min(data.size(), i + static_cast<std::size_t>(batch_size)); ++k)
            idx.push_back(static_cast<int>(k));
        const auto batch = nn::make_batch(data, idx, vae.stats);
        const auto t = vae.model->encode(batch.x_a, batch.x_b);
        parts.push_back(nn::pack_tokens(t.q_o.mean, t.q_a.mean, t.q_b.mean));
    }
    return torch::cat(parts, 0);
}

double compute_token_scale(const torch::Tensor& tokens, int latent_tokens) {
    const auto seg = nn::unpack_tokens(tokens, latent_tokens);
    const double global = seg[0].std().item<double>();
    const double individual = torch::cat({seg[1], seg[2]}, 1).std().item<double>();
    if (!(global > 0.0) || !(individual > 0.0) || !std::isfinite(global) || !std::isfinite(individual)) {
        throw DegenerateStats("latent segments have zero or non-finite spread");
    }
    return individual / global;
}

torch::Tensor embed_captions(const std::vector<std::string>& captions, int text_dim) {
    const motion::HashedBagEncoder enc(text_dim);
    auto out = torch::empty({static_cast<int64_t>(captions.size()), text_dim});
    for (std::size_t i = 0; i < captions.size(); ++i) {
        const Eigen::VectorXf v = enc.encode(captions[i]);
        out[static_cast<int64_t>(i)].copy_(torch::from_blob(const_cast<float*>(v.data()), {text_dim}, torch::kFloat));
    }
    return out;
}

DenoiserTrainResult train_denoiser(VaeBundle& vae, const motion::Dataset& data, const RunConfig& cfg,
                                   const VaeTrainOptions& options) {
    const auto& vc = vae.model->config();
    if (cfg.denoiser.latent_dim != vc.latent_dim || cfg.denoiser.latent_tokens != vc.latent_tokens) {
        throw CheckpointMismatch("denoiser latent shape " + std::to_string(cfg.denoiser.latent_tokens) + "x" +
                                 std::to_string(cfg.denoiser.latent_dim) + " differs from the DHVAE's " +
                                 std::to_string(vc.latent_tokens) + "x" + std::to_string(vc.latent_dim));
    }
    DenoiserTrainResult r;
    r.latents = encode_latents(vae, data);
    const int l = vc.latent_tokens;
    const double s = compute_token_scale(r.latents, l);
    log_line(options.log, "token scale s_l = " + std::to_string(s));

    auto dcfg = cfg.denoiser;
    dcfg.token_scale = s;
    dcfg.T = cfg.diffusion.T;
    torch::manual_seed(cfg.seed + 1);
    r.denoiser.model = nn::Denoiser(dcfg);
    r.denoiser.diffusion = cfg.diffusion;
    auto& model = r.denoiser.model;
    model->train();

    const auto z0 = nn::token_scale(r.latents, l, s);
    std::vector<std::string> captions;
    for (const auto& p : data) captions.push_back(p.text);
    const auto text = embed_captions(captions, dcfg.text_dim);
    const auto schedule = cfg.diffusion.make_schedule();

    torch::optim::AdamW opt(model->parameters(),
                            torch::optim::AdamWOptions(cfg.train_denoiser.lr).weight_decay(cfg.train_denoiser.weight_decay));
    auto gen = at::make_generator<at::CPUGeneratorImpl>(cfg.seed ^ 0x51ce0fu);
    Rng rng(cfg.seed ^ 0xd1ff05e5u);
    int step = 0;
    bool first = true;
    for (int epoch = 1; epoch <= cfg.train_denoiser.epochs; ++epoch) {
        if (options.max_steps && step >= *options.max_steps) break;
        const auto t0 = Clock::now();
        double sum = 0.0;
        int n = 0;
        for (const auto& idx : epoch_batches(rng, static_cast<int>(data.size()), cfg.train_denoiser.batch_size)) {
            if (options.max_steps && step >= *options.max_steps) break;
            set_lr(opt, scheduled_lr(cfg.train_denoiser, step, total_steps(cfg.train_denoiser, data.size())));
            auto sel = torch::tensor(std::vector<int64_t>(idx.begin(), idx.end()), torch::kLong);
            auto loss = nn::training_loss(*model, z0.index_select(0, sel), text.index_select(0, sel), cfg.diffusion,
                                          schedule, gen);
            const double v = loss.item<double>();
            if (!std::isfinite(v)) throw NonFiniteLoss("non-finite denoiser loss at step " + std::to_string(step));
            if (first) {
                r.first_step_loss = v;
                first = false;
            }
            opt.zero_grad();
            loss.backward();
            if (cfg.train_denoiser.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(model->parameters(), cfg.train_denoiser.grad_clip);
            opt.step();
            ++step;
            sum += v;
            ++n;
        }
        if (n == 0) break;
        DenoiserEpochLog log{epoch, sum / n, seconds_since(t0)};
        if (epoch == 1 || epoch % 10 == 0 || epoch == cfg.train_denoiser.epochs) {
            log_line(options.log, "denoiser epoch " + std::to_string(epoch) + " loss " + std::to_string(log.loss));
        }
        r.history.push_back(log);
    }
    model->eval();
    return r;
}

motion::Dataset sample_motions(VaeBundle& vae, DenoiserBundle& den, const SampleRequest& request) {
    if (request.captions.empty()) throw InvalidArgument("sample: no captions");
    const auto& vc = vae.model->config();
    const auto& dc = den.model->config();
    if (dc.latent_dim != vc.latent_dim || dc.latent_tokens != vc.latent_tokens) {
        throw CheckpointMismatch("denoiser and DHVAE latent shapes differ");
    }
    torch::NoGradGuard guard;
    vae.model->eval();
    den.model->eval();
    auto diffusion = den.diffusion;
    if (request.cfg_scale) diffusion.cfg_scale = *request.cfg_scale;
    if (request.steps) diffusion.inference_steps = *request.steps;
    diffusion.validate();
    const auto schedule = diffusion.make_schedule();

    const auto B = static_cast<int64_t>(request.captions.size());
    const auto text = embed_captions(request.captions, dc.text_dim);
    const auto tokens = nn::sample(*den.model, text, diffusion, schedule, request.seed,
                                   {B, 3 * static_cast<int64_t>(dc.latent_tokens), dc.latent_dim});
    const auto seg = nn::unpack_tokens(nn::token_unscale(tokens, dc.latent_tokens, dc.token_scale), dc.latent_tokens);
    auto [ra, rb] = vae.model->decode(seg[0], seg[1], seg[2], vae.frames);

    motion::Dataset out;
    for (int64_t i = 0; i < B; ++i) {
        motion::InteractionPair p;
        p.person_a = raw_sequence(ra[i], vae.layout, vae.stats);
        p.person_b = raw_sequence(rb[i], vae.layout, vae.stats);
        p.text = request.captions[static_cast<std::size_t>(i)];
        const auto fam = motion::family_of_text(p.text);
        p.contact_annotated = fam && motion::family_has_contact(*fam);
        out.push_back(std::move(p));
    }
    return out;
}

nlohmann::json evaluate(const motion::Dataset& generated, const motion::Dataset& reference,
                        const motion::MotionLayout& layout, const motion::SkeletonSpec& skeleton,
                        const EvalFlags& flags) {
    for (const auto* set : {&generated, &reference}) {
        for (const auto& p : *set) {
            if (!(p.person_a.layout == layout) || !(p.person_b.layout == layout)) {
                throw LayoutMismatch("clip layout " + p.person_a.layout.name() + " differs from " + layout.name());
            }
        }
    }
    nlohmann::json report = nlohmann::json::object();
    report["generated"] = generated.size();
    report["reference"] = reference.size();
    if (flags.fidelity) {
        if (reference.empty()) throw InsufficientSamples("fidelity metrics need a reference set");
        const metrics::RandomProjectionExtractor ex(layout.dim(), motion::fit_norm_stats(reference));
        report["fidelity"] = metrics::evaluate_fidelity(generated, reference, ex, flags.fidelity_options).to_json();
    }
    if (flags.physics) {
        const auto body = physics::BodyVolume::from_skeleton(skeleton);
        report["physics"] = physics::evaluate_physics(generated, skeleton, body, flags.physics_config, flags.contact_all).to_json();
    }
    return report;
}

double mpjpe(const motion::Dataset& a, const motion::Dataset& b, const motion::SkeletonSpec& skeleton) {
    if (a.size() != b.size() || a.empty()) throw ShapeMismatch("mpjpe needs two non-empty datasets of equal size");
    double sum = 0.0;
    std::int64_t n = 0;
    const int J = skeleton.joint_count();
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (auto [sa, sb] : {std::pair{&a[i].person_a, &b[i].person_a}, std::pair{&a[i].person_b, &b[i].person_b}}) {
            const auto pa = motion::joint_positions(*sa, skeleton);
            const auto pb = motion::joint_positions(*sb, skeleton);
            if (pa.rows() != pb.rows()) throw ShapeMismatch("mpjpe: frame counts differ");
            for (Eigen::Index f = 0; f < pa.rows(); ++f)
                for (int j = 0; j < J; ++j) {
                    sum += (motion::joint_at(pa, f, j) - motion::joint_at(pb, f, j)).norm();
                    ++n;
                }
        }
    }
    return sum / static_cast<double>(n);
}

motion::Dataset reconstruct(VaeBundle& vae, const motion::Dataset& data) {
    torch::NoGradGuard guard;
    vae.model->eval();
    motion::Dataset out;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::vector<int> idx{static_cast<int>(i)};
        const auto batch = nn::make_batch(data, idx, vae.stats);
        const auto t = vae.model->encode(batch.x_a, batch.x_b);
        auto [ra, rb] = vae.model->decode(t.z_o, t.z_a, t.z_b, batch.x_a.size(1));
        motion::InteractionPair p = data[i];
        p.person_a = raw_sequence(ra[0], vae.layout, vae.stats);
        p.person_b = raw_sequence(rb[0], vae.layout, vae.stats);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace duo::app
