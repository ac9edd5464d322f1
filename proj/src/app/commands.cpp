#include "duo/app/commands.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "duo/app/plot.h"
#include "duo/contrastive/contrastive.h"
#include "duo/error.h"
#include "duo/motion/dataset_io.h"
#include "duo/motion/synth.h"
#include "duo/nn/checkpoint.h"

namespace duo::app {

namespace {

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

motion::SkeletonSpec resolve_skeleton(const motion::DatasetFile& a, const motion::DatasetFile* b,
                                      const std::optional<std::string>& fallback) {
    if (a.skeleton) return *a.skeleton;
    if (b && b->skeleton) return *b->skeleton;
    if (fallback) return motion::SkeletonSpec::by_name(*fallback);
    throw InvalidArgument("no skeleton in the input files; pass --skeleton");
}

nlohmann::json dataset_summary(const motion::Dataset& data) {
    int annotated = 0;
    for (const auto& p : data) annotated += p.contact_annotated ? 1 : 0;
    return {{"count", data.size()},
            {"contact_fraction", data.empty() ? 0.0 : static_cast<double>(annotated) / static_cast<double>(data.size())}};
}

}  // namespace

nlohmann::json cmd_synth(const RunConfig& cfg, const fs::path& out) {
    const auto sk = cfg.data.make_skeleton();
    const auto layout = cfg.data.make_layout();
    motion::DatasetFile file{layout, sk,
                             motion::synth_dataset(cfg.seed, cfg.data.count, sk, layout,
                                                   {cfg.data.frames, cfg.data.frames}, cfg.data.family_list())};
    ensure_parent(out);
    motion::save_dataset(out, file);

    int touching = 0;
    for (const auto& p : file.pairs) touching += contrastive::is_contact(p, sk) ? 1 : 0;
    auto summary = dataset_summary(file.pairs);
    summary["path"] = out.string();
    summary["layout"] = layout.name();
    summary["frames"] = cfg.data.frames;
    summary["touching_fraction"] = static_cast<double>(touching) / static_cast<double>(file.pairs.size());
    return summary;
}

nlohmann::json cmd_train_vae(const RunConfig& cfg, const fs::path& dataset, const fs::path& out,
                             const std::optional<fs::path>& history_path, const Logger& log) {
    const auto file = motion::load_dataset(dataset);
    if (!file.skeleton) throw InvalidArgument("dataset '" + dataset.string() + "' carries no skeleton");
    auto run = cfg;
    run.vae.feature_dim = file.layout.dim();
    run.vae.validate();

    std::vector<VaeEpochLog> history;
    VaeTrainOptions options;
    options.log = log;
    const auto bundle = train_vae(file.pairs, *file.skeleton, run, &history, options);
    if (history_path) {
        ensure_parent(*history_path);
        std::ofstream hist(*history_path);
        if (!hist) throw IoError("cannot write '" + history_path->string() + "'");
        for (const auto& h : history) hist << h.to_json().dump() << "\n";
    }
    ensure_parent(out);
    save_vae(out, bundle, run);

    nlohmann::json summary = {{"path", out.string()}, {"epochs", history.size()}, {"clips", file.pairs.size()}};
    if (!history.empty()) {
        summary["first_epoch"] = history.front().to_json();
        summary["last_epoch"] = history.back().to_json();
    }
    return summary;
}

void save_latents(const fs::path& path, const torch::Tensor& latents, int latent_tokens) {
    nn::Checkpoint c;
    c.kind = "latents";
    c.config = {{"latent_tokens", latent_tokens}};
    c.extras = nlohmann::json::object();
    c.tensors["latents"] = latents.detach().to(torch::kFloat).contiguous();
    ensure_parent(path);
    nn::save_checkpoint(path, c);
}

torch::Tensor load_latents(const fs::path& path) {
    const auto c = nn::load_checkpoint(path);
    nn::expect_kind(c, "latents");
    const auto it = c.tensors.find("latents");
    if (it == c.tensors.end()) throw CheckpointMismatch("latent cache has no 'latents' tensor");
    return it->second;
}

nlohmann::json cmd_train_denoiser(const RunConfig& cfg, const fs::path& dataset, const fs::path& vae_checkpoint,
                                  const fs::path& out, const std::optional<fs::path>& latents_path,
                                  const Logger& log) {
    const auto file = motion::load_dataset(dataset);
    auto vae = load_vae(vae_checkpoint);
    if (!(file.layout == vae.layout)) {
        throw LayoutMismatch("dataset layout " + file.layout.name() + " differs from the DHVAE's " + vae.layout.name());
    }
    VaeTrainOptions options;
    options.log = log;
    auto r = train_denoiser(vae, file.pairs, cfg, options);
    ensure_parent(out);
    save_denoiser(out, r.denoiser);
    const fs::path cache = latents_path ? *latents_path : fs::path(out.string() + ".latents");
    save_latents(cache, r.latents, vae.model->config().latent_tokens);

    nlohmann::json summary = {{"path", out.string()},
                              {"latents", cache.string()},
                              {"token_scale", r.denoiser.model->config().token_scale},
                              {"first_step_loss", r.first_step_loss},
                              {"epochs", r.history.size()}};
    if (!r.history.empty()) summary["last_loss"] = r.history.back().loss;
    return summary;
}

std::vector<std::string> family_captions(motion::Family family, int count) {
    const auto& t = motion::family_templates(family);
    std::vector<std::string> out;
    for (int i = 0; i < count; ++i) out.push_back(t[static_cast<std::size_t>(i) % t.size()]);
    return out;
}

namespace {

nlohmann::json write_samples(VaeBundle& vae, DenoiserBundle& den, const SampleArgs& args, const fs::path& out,
                             std::optional<double> omega) {
    SampleRequest req;
    req.captions = args.captions;
    req.seed = args.seed;
    req.cfg_scale = omega;
    req.steps = args.steps;
    auto pairs = sample_motions(vae, den, req);
    ensure_parent(out);
    motion::save_dataset(out, {vae.layout, vae.skeleton, pairs});
    auto summary = dataset_summary(pairs);
    summary["path"] = out.string();
    summary["cfg_scale"] = omega ? *omega : den.diffusion.cfg_scale;
    return summary;
}

}  // namespace

nlohmann::json cmd_sample(const SampleArgs& args) {
    auto vae = load_vae(args.vae);
    auto den = load_denoiser(args.denoiser);
    auto summary = write_samples(vae, den, args, args.out, args.cfg_scale);
    if (args.plot) {
        write_motion_svg(*args.plot, motion::load_dataset(args.out).pairs, vae.skeleton);
        summary["plot"] = args.plot->string();
    }
    return summary;
}

std::string sweep_file_name(double omega) {
    std::ostringstream s;
    s << "omega_" << std::setprecision(6) << omega << ".duo";
    return s.str();
}

std::optional<double> parse_sweep_file_name(const std::string& name) {
    const std::string prefix = "omega_", suffix = ".duo";
    if (name.size() <= prefix.size() + suffix.size() || name.rfind(prefix, 0) != 0 ||
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
        return std::nullopt;
    }
    const auto body = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    try {
        std::size_t used = 0;
        const double v = std::stod(body, &used);
        if (used != body.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

nlohmann::json cmd_sample_sweep(const SampleArgs& args, const std::vector<double>& omegas, const fs::path& dir) {
    if (omegas.empty()) throw InvalidArgument("empty guidance sweep");
    auto vae = load_vae(args.vae);
    auto den = load_denoiser(args.denoiser);
    fs::create_directories(dir);
    nlohmann::json files = nlohmann::json::array();
    for (double w : omegas) files.push_back(write_samples(vae, den, args, dir / sweep_file_name(w), w));
    return {{"dir", dir.string()}, {"files", files}};
}

namespace {

void add_point(Series& s, const std::string& name, double x, const nlohmann::json& j, const char* key) {
    if (j.contains(key) && j.at(key).is_number()) s[name].emplace_back(x, j.at(key).get<double>());
}

}  // namespace

nlohmann::json cmd_eval(const EvalArgs& args) {
    const auto ref = motion::load_dataset(args.reference);
    nlohmann::json report;
    if (!args.generated.empty()) {
        const auto gen = motion::load_dataset(args.generated);
        if (!(gen.layout == ref.layout)) {
            throw LayoutMismatch("generated layout " + gen.layout.name() + " differs from reference " + ref.layout.name());
        }
        report = evaluate(gen.pairs, ref.pairs, gen.layout, resolve_skeleton(gen, &ref, args.skeleton), args.flags);
    } else {
        report = nlohmann::json::object();
    }

    if (args.sweep_dir) {
        std::vector<std::pair<double, fs::path>> files;
        for (const auto& e : fs::directory_iterator(*args.sweep_dir)) {
            if (auto w = parse_sweep_file_name(e.path().filename().string())) files.emplace_back(*w, e.path());
        }
        if (files.empty()) throw InvalidArgument("no omega_<value>.duo files in '" + args.sweep_dir->string() + "'");
        std::sort(files.begin(), files.end());
        Series series;
        nlohmann::json sweep = nlohmann::json::array();
        for (const auto& [w, path] : files) {
            const auto gen = motion::load_dataset(path);
            if (!(gen.layout == ref.layout)) throw LayoutMismatch("sweep file '" + path.string() + "' has another layout");
            auto r = evaluate(gen.pairs, ref.pairs, gen.layout, resolve_skeleton(gen, &ref, args.skeleton), args.flags);
            if (r.contains("fidelity")) {
                const auto& f = r["fidelity"];
                add_point(series, "fid", w, f, "fid");
                add_point(series, "diversity", w, f, "diversity");
                add_point(series, "mm_dist", w, f, "mm_dist");
                add_point(series, "multimodality", w, f, "multimodality");
                if (f.contains("r_precision") && f["r_precision"].is_array())
                    series["r_precision_top1"].emplace_back(w, f["r_precision"][0].get<double>());
            }
            if (r.contains("physics")) {
                const auto& p = r["physics"];
                if (p.contains("metrics")) add_point(series, "pv", w, p["metrics"], "pv");
                add_point(series, "contact_ratio", w, p, "contact_ratio");
            }
            sweep.push_back({{"cfg_scale", w}, {"file", path.string()}, {"report", r}});
        }
        report["sweep"] = sweep;
        const fs::path plot = args.plot ? *args.plot : *args.sweep_dir / "sweep.svg";
        write_sweep_svg(plot, series, "cfg scale");
        report["sweep_plot"] = plot.string();
    }

    if (args.out) {
        ensure_parent(*args.out);
        std::ofstream o(*args.out);
        if (!o) throw IoError("cannot write '" + args.out->string() + "'");
        o << report.dump(2) << "\n";
    }
    return report;
}

void cmd_plot(const fs::path& input, const fs::path& out, int max_pairs, const std::optional<std::string>& skeleton) {
    const auto file = motion::load_dataset(input);
    write_motion_svg(out, file.pairs, resolve_skeleton(file, nullptr, skeleton), max_pairs);
}

}  // namespace duo::app
