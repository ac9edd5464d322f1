// duo: synthesize data, train the two stages, sample and evaluate.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>
#include "CLI11.hpp"

#include "duo/app/commands.h"
#include "duo/app/config.h"
#include "duo/error.h"
#include "duo/motion/synth.h"

namespace {

using duo::app::RunConfig;
using duo::app::resolve_output;
namespace fs = std::filesystem;

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
};

struct TrainFlags {
    std::optional<int> epochs;
    std::optional<int> batch_size;
    std::optional<double> lr;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config_path, "JSON config with overrides of the toy defaults");
    cmd->add_option("--seed", c.seed, "Random seed");
    cmd->add_option("--output-dir", c.output_dir, "Directory for default output paths");
}

void add_train(CLI::App* cmd, TrainFlags& t) {
    cmd->add_option("--epochs", t.epochs);
    cmd->add_option("--batch-size", t.batch_size);
    cmd->add_option("--lr", t.lr);
}

void apply_train(duo::app::TrainParams& p, const TrainFlags& t) {
    if (t.epochs) p.epochs = *t.epochs;
    if (t.batch_size) p.batch_size = *t.batch_size;
    if (t.lr) p.lr = *t.lr;
}

// CLI flag > config file > default.
RunConfig build_config(const Common& c) {
    RunConfig cfg = RunConfig::toy();
    if (!c.config_path.empty()) cfg = RunConfig::load(c.config_path, cfg);
    if (c.seed) cfg.seed = *c.seed;
    if (c.output_dir) cfg.output_dir = *c.output_dir;
    return cfg;
}

fs::path output_path(const RunConfig& cfg, const std::string& given, const std::string& fallback) {
    return resolve_output(given.empty() ? fs::path(cfg.output_dir) / fallback : fs::path(given));
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << std::endl; }

void log_stderr(const std::string& s) { std::cerr << s << std::endl; }

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto end = s.find(',', start);
        const auto item = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
        if (!item.empty()) {
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw duo::InvalidArgument("not a number: '" + item + "'");
            }
        }
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    torch::set_num_threads(1);
    CLI::App app{"Two-person interaction generation: data, training, sampling and evaluation"};
    app.require_subcommand(1);

    Common common;
    auto* config_cmd = app.add_subcommand("config", "Print the effective configuration");
    add_common(config_cmd, common);

    std::string synth_out;
    std::optional<int> synth_count, synth_frames;
    std::optional<std::string> synth_skeleton, synth_layout;
    std::vector<std::string> synth_families;
    auto* synth = app.add_subcommand("synth", "Write a synthetic interaction dataset");
    add_common(synth, common);
    synth->add_option("-o,--out", synth_out, "Dataset file (default <output-dir>/data.duo)");
    synth->add_option("--count", synth_count);
    synth->add_option("--frames", synth_frames);
    synth->add_option("--skeleton", synth_skeleton, "Skeleton name or JSON file");
    synth->add_option("--layout", synth_layout, "ih or ix");
    synth->add_option("--families", synth_families, "Subset of approach, circle, reach-and-touch, push-retreat")
        ->delimiter(',');

    std::string data_path, vae_out, vae_history;
    TrainFlags vae_flags;
    std::optional<double> triplet_weight;
    auto* train_vae = app.add_subcommand("train-vae", "Train the DHVAE with the contrastive term");
    add_common(train_vae, common);
    add_train(train_vae, vae_flags);
    train_vae->add_option("-d,--data", data_path, "Dataset file")->required();
    train_vae->add_option("-o,--out", vae_out, "Checkpoint (default <output-dir>/vae.ckpt)");
    train_vae->add_option("--history", vae_history, "Per-epoch losses as JSON lines");
    train_vae->add_option("--triplet-weight", triplet_weight);

    std::string vae_path, den_out, latents_out;
    TrainFlags den_flags;
    auto* train_den = app.add_subcommand("train-denoiser", "Train the latent denoiser against a frozen DHVAE");
    add_common(train_den, common);
    add_train(train_den, den_flags);
    train_den->add_option("-d,--data", data_path, "Dataset file")->required();
    train_den->add_option("--vae", vae_path, "DHVAE checkpoint")->required();
    train_den->add_option("-o,--out", den_out, "Checkpoint (default <output-dir>/denoiser.ckpt)");
    train_den->add_option("--latents", latents_out, "Latent cache (default <out>.latents)");

    duo::app::SampleArgs sample_args;
    std::string sample_out, sample_plot, sample_text, sample_family, sweep, sweep_dir;
    std::optional<std::uint64_t> sample_seed;
    int sample_count = 4;
    auto* sample = app.add_subcommand("sample", "Generate interactions from text");
    sample->add_option("--vae", vae_path, "DHVAE checkpoint")->required();
    sample->add_option("--denoiser", sample_args.denoiser, "Denoiser checkpoint")->required();
    sample->add_option("--text", sample_text, "Caption used for every sample");
    sample->add_option("--family", sample_family, "Cycle through a family's captions instead of --text");
    sample->add_option("-n,--count", sample_count)->check(CLI::PositiveNumber);
    sample->add_option("--seed", sample_seed);
    sample->add_option("--omega", sample_args.cfg_scale, "Guidance scale (default from the checkpoint)");
    sample->add_option("--steps", sample_args.steps, "Sampling steps");
    sample->add_option("-o,--out", sample_out, "Motion file (default samples.duo)");
    sample->add_option("--plot", sample_plot, "Trajectory and skeleton SVG");
    sample->add_option("--omega-sweep", sweep, "Comma-separated guidance scales; writes one file per scale");
    sample->add_option("--sweep-dir", sweep_dir, "Directory for sweep files (default sweep)");

    duo::app::EvalArgs eval_args;
    std::string gen_path, ref_path, eval_out, eval_sweep, eval_plot;
    bool want_fid = false, want_phys = false;
    std::optional<std::string> eval_skeleton;
    auto* eval = app.add_subcommand("eval", "Fidelity and physics metrics as JSON");
    eval->add_option("-g,--generated", gen_path, "Generated motion file");
    eval->add_option("-r,--reference", ref_path, "Reference motion file")->required();
    eval->add_flag("--fidelity", want_fid, "Distribution and text-alignment metrics");
    eval->add_flag("--physics", want_phys, "Penetration and contact metrics");
    eval->add_flag("--contact-all", eval_args.flags.contact_all, "Count every clip in the contact ratio");
    eval->add_option("--skeleton", eval_skeleton, "Skeleton when the files carry none");
    eval->add_option("-o,--out", eval_out, "Report file");
    eval->add_option("--sweep-dir", eval_sweep, "Evaluate omega_<v>.duo files and plot metric vs scale");
    eval->add_option("--plot", eval_plot, "Sweep plot (default <sweep-dir>/sweep.svg)");
    eval->add_option("--seed", eval_args.flags.fidelity_options.seed, "Subset sampling seed");

    std::string plot_in, plot_out;
    int plot_max = 8;
    std::optional<std::string> plot_skeleton;
    auto* plot = app.add_subcommand("plot", "Draw trajectories and skeletons of a motion file");
    plot->add_option("-i,--input", plot_in)->required();
    plot->add_option("-o,--out", plot_out)->required();
    plot->add_option("--max", plot_max)->check(CLI::PositiveNumber);
    plot->add_option("--skeleton", plot_skeleton);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*config_cmd) {
            auto cfg = build_config(common);
            cfg.finalize();
            print(cfg.to_json());
        } else if (*synth) {
            auto cfg = build_config(common);
            if (synth_count) cfg.data.count = *synth_count;
            if (synth_frames) cfg.data.frames = *synth_frames;
            if (synth_skeleton) cfg.data.skeleton = *synth_skeleton;
            if (synth_layout) cfg.data.layout = *synth_layout;
            if (!synth_families.empty()) cfg.data.families = synth_families;
            cfg.finalize();
            print(duo::app::cmd_synth(cfg, output_path(cfg, synth_out, "data.duo")));
        } else if (*train_vae) {
            auto cfg = build_config(common);
            apply_train(cfg.train_vae, vae_flags);
            if (triplet_weight) cfg.vae.triplet_weight = *triplet_weight;
            cfg.finalize();
            std::optional<fs::path> hist;
            if (!vae_history.empty()) hist = resolve_output(vae_history);
            print(duo::app::cmd_train_vae(cfg, data_path, output_path(cfg, vae_out, "vae.ckpt"), hist, log_stderr));
        } else if (*train_den) {
            auto cfg = build_config(common);
            apply_train(cfg.train_denoiser, den_flags);
            // The latent shape comes from the checkpoint being trained against.
            const auto vae = duo::app::load_vae(vae_path);
            cfg.vae = vae.model->config();
            cfg.denoiser.latent_dim = cfg.vae.latent_dim;
            cfg.denoiser.latent_tokens = cfg.vae.latent_tokens;
            cfg.data.frames = vae.frames;
            cfg.finalize();
            std::optional<fs::path> cache;
            if (!latents_out.empty()) cache = resolve_output(latents_out);
            print(duo::app::cmd_train_denoiser(cfg, data_path, vae_path, output_path(cfg, den_out, "denoiser.ckpt"),
                                               cache, log_stderr));
        } else if (*sample) {
            sample_args.vae = vae_path;
            if (sample_seed) sample_args.seed = *sample_seed;
            if (!sample_text.empty() && !sample_family.empty()) throw duo::InvalidArgument("--text and --family are exclusive");
            if (!sample_family.empty()) {
                const auto fam = duo::motion::parse_family(sample_family);
                if (!fam) throw duo::InvalidArgument("unknown family '" + sample_family + "'");
                sample_args.captions = duo::app::family_captions(*fam, sample_count);
            } else if (!sample_text.empty()) {
                sample_args.captions.assign(static_cast<std::size_t>(sample_count), sample_text);
            } else {
                throw duo::InvalidArgument("sample needs --text or --family");
            }
            if (!sample_plot.empty()) sample_args.plot = resolve_output(sample_plot);
            if (!sweep.empty()) {
                print(duo::app::cmd_sample_sweep(sample_args, parse_list(sweep),
                                                 resolve_output(sweep_dir.empty() ? "sweep" : sweep_dir)));
            } else {
                sample_args.out = resolve_output(sample_out.empty() ? "samples.duo" : sample_out);
                print(duo::app::cmd_sample(sample_args));
            }
        } else if (*eval) {
            if (want_fid || want_phys) {
                eval_args.flags.fidelity = want_fid;
                eval_args.flags.physics = want_phys;
            }
            if (gen_path.empty() && eval_sweep.empty()) throw duo::InvalidArgument("eval needs --generated or --sweep-dir");
            eval_args.generated = gen_path;
            eval_args.reference = ref_path;
            eval_args.skeleton = eval_skeleton;
            if (!eval_out.empty()) eval_args.out = resolve_output(eval_out);
            if (!eval_sweep.empty()) eval_args.sweep_dir = fs::path(eval_sweep);
            if (!eval_plot.empty()) eval_args.plot = resolve_output(eval_plot);
            print(duo::app::cmd_eval(eval_args));
        } else if (*plot) {
            duo::app::cmd_plot(plot_in, resolve_output(plot_out), plot_max, plot_skeleton);
        }
    } catch (const duo::Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
