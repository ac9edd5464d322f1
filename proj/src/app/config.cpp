#include "duo/app/config.h"

#include <cstdlib>
#include <fstream>

#include "duo/error.h"

namespace duo::app {

motion::SkeletonSpec DatasetParams::make_skeleton() const { return motion::SkeletonSpec::by_name(skeleton); }

motion::MotionLayout DatasetParams::make_layout() const {
    return motion::MotionLayout::parse(layout, make_skeleton().joint_count());
}

std::vector<motion::Family> DatasetParams::family_list() const {
    if (families.empty()) return {motion::kAllFamilies.begin(), motion::kAllFamilies.end()};
    std::vector<motion::Family> out;
    for (const auto& name : families) {
        auto f = motion::parse_family(name);
        if (!f) throw InvalidArgument("unknown family '" + name + "'");
        out.push_back(*f);
    }
    return out;
}

namespace {

nlohmann::json train_json(const TrainParams& t) {
    return {{"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"lr", t.lr},
            {"weight_decay", t.weight_decay},
            {"grad_clip", t.grad_clip},
            {"warmup_steps", t.warmup_steps},
            {"cosine_decay", t.cosine_decay},
            {"min_lr_ratio", t.min_lr_ratio}};
}

TrainParams train_merge(TrainParams t, const nlohmann::json& j) {
    if (j.contains("epochs")) t.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) t.batch_size = j.at("batch_size").get<int>();
    if (j.contains("lr")) t.lr = j.at("lr").get<double>();
    if (j.contains("weight_decay")) t.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("grad_clip")) t.grad_clip = j.at("grad_clip").get<double>();
    if (j.contains("warmup_steps")) t.warmup_steps = j.at("warmup_steps").get<int>();
    if (j.contains("cosine_decay")) t.cosine_decay = j.at("cosine_decay").get<bool>();
    if (j.contains("min_lr_ratio")) t.min_lr_ratio = j.at("min_lr_ratio").get<double>();
    return t;
}

void validate_train(const TrainParams& t, const char* which) {
    const std::string w = which;
    if (t.epochs < 0) throw InvalidArgument(w + ": epochs must be >= 0");
    if (t.batch_size < 1) throw InvalidArgument(w + ": batch_size must be >= 1");
    if (!(t.lr > 0.0)) throw InvalidArgument(w + ": lr must be positive");
    if (!(t.weight_decay >= 0.0)) throw InvalidArgument(w + ": weight_decay must be >= 0");
    if (!(t.grad_clip >= 0.0)) throw InvalidArgument(w + ": grad_clip must be >= 0");
    if (t.warmup_steps < 0) throw InvalidArgument(w + ": warmup_steps must be >= 0");
    if (!(t.min_lr_ratio >= 0.0 && t.min_lr_ratio <= 1.0)) throw InvalidArgument(w + ": min_lr_ratio must be in [0, 1]");
}

}  // namespace

void RunConfig::finalize() {
    if (data.count < 1) throw InvalidArgument("data.count must be >= 1");
    if (data.frames < 1) throw InvalidArgument("data.frames must be >= 1");
    data.family_list();
    vae.feature_dim = data.make_layout().dim();
    if (data.frames > vae.max_frames) throw InvalidArgument("data.frames exceeds dhvae.max_frames");
    vae.validate();
    contrastive.validate();
    diffusion.validate();
    denoiser.T = diffusion.T;
    denoiser.validate();
    validate_train(train_vae, "train_vae");
    validate_train(train_denoiser, "train_denoiser");
}

nlohmann::json RunConfig::to_json() const {
    return {{"seed", seed},
            {"output_dir", output_dir},
            {"data",
             {{"skeleton", data.skeleton},
              {"layout", data.layout},
              {"count", data.count},
              {"frames", data.frames},
              {"families", data.families}}},
            {"dhvae", vae.to_json()},
            {"contrastive", contrastive.to_json()},
            {"diffusion", diffusion.to_json()},
            {"denoiser", denoiser.to_json()},
            {"train_vae", train_json(train_vae)},
            {"train_denoiser", train_json(train_denoiser)}};
}

RunConfig RunConfig::merge(const RunConfig& base, const nlohmann::json& j) {
    RunConfig c = base;
    try {
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("data")) {
            const auto& d = j.at("data");
            if (d.contains("skeleton")) c.data.skeleton = d.at("skeleton").get<std::string>();
            if (d.contains("layout")) c.data.layout = d.at("layout").get<std::string>();
            if (d.contains("count")) c.data.count = d.at("count").get<int>();
            if (d.contains("frames")) c.data.frames = d.at("frames").get<int>();
            if (d.contains("families")) c.data.families = d.at("families").get<std::vector<std::string>>();
        }
        if (j.contains("dhvae")) c.vae = nn::DHVAEConfig::from_json(j.at("dhvae"), c.vae);
        if (j.contains("contrastive")) c.contrastive = contrastive::ContrastiveConfig::from_json(j.at("contrastive"), c.contrastive);
        if (j.contains("diffusion")) c.diffusion = nn::DiffusionConfig::from_json(j.at("diffusion"), c.diffusion);
        // The denoiser's latent shape follows the DHVAE unless set explicitly.
        c.denoiser.latent_dim = c.vae.latent_dim;
        c.denoiser.latent_tokens = c.vae.latent_tokens;
        if (j.contains("denoiser")) c.denoiser = nn::DenoiserConfig::from_json(j.at("denoiser"), c.denoiser);
        if (j.contains("train_vae")) c.train_vae = train_merge(c.train_vae, j.at("train_vae"));
        if (j.contains("train_denoiser")) c.train_denoiser = train_merge(c.train_denoiser, j.at("train_denoiser"));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path, const RunConfig& base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return merge(base, j);
}

RunConfig RunConfig::toy() {
    RunConfig c;
    c.vae = nn::DHVAEConfig::toy(c.data.make_layout().dim());
    c.denoiser.latent_dim = c.vae.latent_dim;
    c.denoiser.latent_tokens = c.vae.latent_tokens;
    c.denoiser.hidden_dim = 256;
    c.denoiser.ff_dim = 512;
    c.train_vae.epochs = 60;
    c.train_vae.batch_size = 16;
    c.train_vae.lr = 1e-4;
    c.train_denoiser.epochs = 700;
    c.train_denoiser.batch_size = 64;
    c.train_denoiser.lr = 1e-3;
    c.train_denoiser.cosine_decay = true;
    return c;
}

std::filesystem::path resolve_output(const std::filesystem::path& p) {
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("DUO_OUTPUT_ROOT"); root && *root) return std::filesystem::path(root) / p;
    return p;
}

}  // namespace duo::app
