// gala: source-free graph domain adaptation pipeline.
//
// Subcommands cover the full workflow: generate or load data, pretrain the
// classifier and the diffusion model on the source domain, reconstruct target
// graphs into source style, adapt with curriculum pseudo-labels plus jigsaw
// consistency, and report metrics.
//
// Exit codes: 0 success, 1 contract/usage error, 2 I/O or format error.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gala/checkpoint.hpp"
#include "gala/trainer.hpp"

namespace {

struct CommonArgs {
    std::optional<std::string> config_path;
    std::vector<std::string> sets;  // raw key=value overrides
    std::optional<std::uint64_t> seed;
    std::optional<int> seeds;
    std::optional<std::string> out_dir;
    std::optional<std::string> source;
    std::optional<std::string> target;
    std::optional<std::string> task;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "config file (key=value lines)");
    cmd->add_option("--set", args.sets, "override a single config key, e.g. --set adapt.lr=1e-3")
        ->take_all();
    cmd->add_option("--seed", args.seed, "base RNG seed");
    cmd->add_option("--seeds", args.seeds, "number of seeds to run");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--source", args.source, "source dataset (TU directory or canonical JSON)");
    cmd->add_option("--target", args.target, "target dataset (TU directory or canonical JSON)");
    cmd->add_option("--task", args.task, "task name used in metrics rows");
}

gala::ExperimentConfig build_config(const CommonArgs& args) {
    gala::ExperimentConfig cfg;
    if (args.config_path) cfg = gala::parse_config_file(*args.config_path, cfg);
    for (const std::string& kv : args.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw gala::ArgumentError("--set expects key=value, got '" + kv + "'");
        gala::apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.seed) cfg.seed = *args.seed;
    if (args.seeds) cfg.seeds = *args.seeds;
    if (args.out_dir) cfg.out_dir = *args.out_dir;
    if (args.source) cfg.data_source = *args.source;
    if (args.target) cfg.data_target = *args.target;
    if (args.task) cfg.task = *args.task;
    return cfg;
}

// `--data dir` accepts either a dataset or a `synth --out` directory, in which
// case the source domain inside it is used.
std::string resolve_data_dir(const std::string& path) {
    namespace fs = std::filesystem;
    if (fs::is_directory(path) && !fs::exists(fs::path(path) / "source.json")) return path;
    if (fs::is_directory(path)) return (fs::path(path) / "source").string();
    return path;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::string token;
    std::stringstream ss(csv);
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        out.push_back(gala::detail::parse_double(token));
    }
    if (out.empty()) throw gala::ArgumentError("expected a comma-separated number list");
    return out;
}

int cmd_synth(const gala::ExperimentConfig& cfg) {
    const std::string dir = gala::effective_out_dir(cfg);
    auto [source, target] =
        gala::generate_synthetic_benchmark(gala::SyntheticSpec::from_config(cfg), cfg.seed);
    std::filesystem::create_directories(dir);
    gala::write_tu_dataset(source, std::filesystem::path(dir) / "source");
    gala::write_tu_dataset(target, std::filesystem::path(dir) / "target");
    gala::write_text_file(dir + "/source.json", gala::dataset_to_json(source).dump(2) + "\n");
    gala::write_text_file(dir + "/target.json", gala::dataset_to_json(target).dump(2) + "\n");
    std::printf("wrote %zu source + %zu target graphs to %s (TU dirs + canonical JSON)\n",
                source.graphs.size(), target.graphs.size(), dir.c_str());
    std::printf("mean density: source %.4f, target %.4f\n", gala::mean_density(source),
                gala::mean_density(target));
    return 0;
}

int cmd_pretrain(const gala::ExperimentConfig& cfg, const std::string& data,
                 const std::string& save) {
    if (data.empty()) throw gala::ArgumentError("pretrain needs --data");
    const gala::Dataset source = gala::load_dataset_any(resolve_data_dir(data));
    gala::PretrainResult result =
        gala::pretrain_source(source, gala::pretrain_config_from(cfg, cfg.seed));
    const std::string path =
        save.empty() ? gala::effective_out_dir(cfg) + "/classifier.json" : save;
    std::filesystem::create_directories(std::filesystem::path(path).parent_path().empty()
                                            ? "."
                                            : std::filesystem::path(path).parent_path().string());
    gala::save_classifier(path, result.model, gala::config_hash(cfg));
    std::printf("pretrained on %zu graphs; final epoch loss %.6f; saved %s\n",
                source.graphs.size(), result.epoch_losses.back(), path.c_str());
    return 0;
}

int cmd_train_diffusion(const gala::ExperimentConfig& cfg, const std::string& data,
                        const std::string& save) {
    if (data.empty()) throw gala::ArgumentError("train-diffusion needs --data");
    const gala::Dataset source = gala::load_dataset_any(resolve_data_dir(data));
    const gala::NoiseSchedule sched(cfg.beta_min, cfg.beta_max);
    gala::DiffusionTrainResult result =
        gala::train_score_network(source, sched, gala::diffusion_config_from(cfg, cfg.seed));
    const std::string path = save.empty() ? gala::effective_out_dir(cfg) + "/score.json" : save;
    std::filesystem::create_directories(std::filesystem::path(path).parent_path().empty()
                                            ? "."
                                            : std::filesystem::path(path).parent_path().string());
    gala::save_score_network(path, result.net, sched, /*ema_weights=*/true,
                             gala::config_hash(cfg));
    std::printf("trained score network on %zu graphs; first/last epoch loss %.4f -> %.4f; saved %s\n",
                source.graphs.size(), result.epoch_losses.front(), result.epoch_losses.back(),
                path.c_str());
    return 0;
}

int cmd_reconstruct(const gala::ExperimentConfig& cfg, const std::string& data,
                    const std::string& score_path) {
    if (data.empty()) throw gala::ArgumentError("reconstruct needs --data");
    if (score_path.empty()) throw gala::ArgumentError("reconstruct needs --score");
    const gala::Dataset target = gala::load_dataset_any(data);
    gala::ScoreCheckpoint ckpt = gala::load_score_network(score_path);
    gala::Dataset recon = gala::reconstruct_dataset(target, ckpt.network, ckpt.schedule,
                                                    cfg.t_recon, cfg.dt, cfg.seed);
    const std::string dir = gala::effective_out_dir(cfg);
    std::filesystem::create_directories(dir);
    const std::string out_path = dir + "/reconstructed.json";
    gala::write_text_file(
        out_path, gala::reconstruction_dump(recon, cfg.t_recon, cfg.dt, cfg.seed).dump(2) + "\n");
    std::printf("reconstructed %zu graphs at t_recon=%g; mean density %.4f -> %.4f; wrote %s\n",
                recon.graphs.size(), cfg.t_recon, gala::mean_density(target),
                gala::mean_density(recon), out_path.c_str());
    return 0;
}

int cmd_adapt(const gala::ExperimentConfig& cfg) {
    const gala::MetricsReport report = gala::run_adaptation(cfg);
    std::printf("task %s over %zu seeds\n", report.task.c_str(), report.runs.size());
    std::printf("  source-only accuracy: %.4f +/- %.4f\n", report.source_only_mean,
                report.source_only_std);
    std::printf("  adapted accuracy:     %.4f +/- %.4f (reconstructed test)\n",
                report.accuracy_mean, report.accuracy_std);
    std::printf("  adapted accuracy:     %.4f +/- %.4f (raw test)\n", report.accuracy_raw_mean,
                report.accuracy_raw_std);
    std::printf("metrics written to %s\n", gala::effective_out_dir(cfg).c_str());
    return 0;
}

int cmd_evaluate(const gala::ExperimentConfig& cfg) {
    const gala::MetricsReport report = gala::evaluate_source_only(cfg);
    gala::write_run_outputs(report, gala::effective_out_dir(cfg));
    std::printf("source-only accuracy over %zu seeds: %.4f +/- %.4f\n", report.runs.size(),
                report.source_only_mean, report.source_only_std);
    return 0;
}

int cmd_sweep(const gala::ExperimentConfig& cfg, const std::string& t_list,
              const std::string& a_list) {
    const std::vector<double> t_values =
        parse_double_list(t_list.empty() ? "0.05,0.1,0.2,0.3,0.4" : t_list);
    const std::vector<double> a_values = parse_double_list(a_list.empty() ? "0.95" : a_list);
    auto [source, target] = gala::resolve_domains(cfg);

    const std::string dir = gala::effective_out_dir(cfg);
    std::filesystem::create_directories(dir);
    std::string rows = "t_recon,alpha_start,accuracy_mean,accuracy_std,source_only_mean\n";
    for (const double t : t_values)
        for (const double a : a_values) {
            gala::ExperimentConfig point = cfg;
            point.t_recon = t;
            point.alpha_start = a;
            char label[64];
            std::snprintf(label, sizeof(label), "t%.3g_a%.3g", t, a);
            point.task = cfg.task + "/" + label;
            gala::AdaptationRun run = gala::run_adaptation_on(source, target, point);
            gala::write_run_outputs(run.report, dir + "/" + label);
            rows += gala::detail::fmt_double(t) + "," + gala::detail::fmt_double(a) + "," +
                    gala::detail::csv_double(run.report.accuracy_mean) + "," +
                    gala::detail::csv_double(run.report.accuracy_std) + "," +
                    gala::detail::csv_double(run.report.source_only_mean) + "\n";
            std::printf("%s: adapted %.4f +/- %.4f (source-only %.4f)\n", label,
                        run.report.accuracy_mean, run.report.accuracy_std,
                        run.report.source_only_mean);
        }
    gala::write_text_file(dir + "/sweep.csv", rows);
    std::printf("sweep table written to %s/sweep.csv\n", dir.c_str());
    return 0;
}

int cmd_report(const gala::ExperimentConfig& cfg, const std::string& metrics_path,
               const std::string& scaling_sizes) {
    if (!scaling_sizes.empty()) {
        // Time reconstruction + adaptation across target-set sizes and fit a line.
        auto [source, target] = gala::resolve_domains(cfg);
        gala::PretrainResult pre =
            gala::pretrain_source(source, gala::pretrain_config_from(cfg, cfg.seed));
        const gala::NoiseSchedule sched(cfg.beta_min, cfg.beta_max);
        gala::DiffusionTrainResult diff = gala::train_score_network(
            source, sched, gala::diffusion_config_from(cfg, cfg.seed));
        std::vector<int> sizes;
        for (double v : parse_double_list(scaling_sizes)) sizes.push_back(static_cast<int>(v));
        const gala::ScalingReport sr = gala::scaling_probe(sizes, [&](int size) {
            return gala::time_adaptation(target, size, pre.model, diff.net, sched, cfg,
                                         /*epochs=*/3, cfg.seed);
        });
        std::string rows = "size,seconds\n";
        for (const gala::ScalingPoint& p : sr.points) {
            std::printf("  %d graphs: %.3f s\n", p.size, p.seconds);
            rows += std::to_string(p.size) + "," + gala::detail::csv_double(p.seconds) + "\n";
        }
        if (sr.degenerate)
            std::printf("fit degenerate (single size)\n");
        else
            std::printf("fit: seconds = %.6f * size + %.6f (r2 %.4f)\n", sr.slope, sr.intercept,
                        sr.r2);
        const std::string dir = gala::effective_out_dir(cfg);
        std::filesystem::create_directories(dir);
        gala::write_text_file(dir + "/scaling.csv", rows);
        return 0;
    }

    const std::string path =
        metrics_path.empty() ? gala::effective_out_dir(cfg) + "/metrics.json" : metrics_path;
    std::ifstream in(path);
    if (!in) throw gala::IoError("cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw gala::FormatError(path + ": " + e.what());
    }
    std::printf("task %s\n", j.value("task", "?").c_str());
    std::printf("  adapted:     %.4f +/- %.4f (reconstructed test)\n",
                j.value("accuracy_mean", 0.0), j.value("accuracy_std", 0.0));
    std::printf("  adapted raw: %.4f +/- %.4f\n", j.value("accuracy_raw_mean", 0.0),
                j.value("accuracy_raw_std", 0.0));
    std::printf("  source-only: %.4f +/- %.4f\n", j.value("source_only_mean", 0.0),
                j.value("source_only_std", 0.0));
    for (const auto& run : j.at("runs")) {
        const auto& shift = run.at("density_shift");
        std::printf("  seed %llu: adapted %.4f, source-only %.4f, density toward source %.0f%% (p=%.3g)\n",
                    static_cast<unsigned long long>(run.value("seed", 0ULL)),
                    run.value("adapted_accuracy", 0.0), run.value("source_only_accuracy", 0.0),
                    100.0 * shift.value("fraction_toward", 0.0), shift.value("p_value", 1.0));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"source-free graph domain adaptation via diffusion reconstruction"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string data, save, score_path, t_list, a_list, metrics_path, scaling_sizes;

    CLI::App* synth = app.add_subcommand("synth", "generate the two-domain synthetic benchmark");
    add_common(synth, common);

    CLI::App* pretrain = app.add_subcommand("pretrain", "train the classifier on a source domain");
    add_common(pretrain, common);
    pretrain->add_option("--data", data, "training dataset (TU dir, JSON, or synth output dir)");
    pretrain->add_option("--save", save, "checkpoint path (default <out>/classifier.json)");

    CLI::App* traind =
        app.add_subcommand("train-diffusion", "train the score network on a source domain");
    add_common(traind, common);
    traind->add_option("--data", data, "training dataset (TU dir, JSON, or synth output dir)");
    traind->add_option("--save", save, "checkpoint path (default <out>/score.json)");

    CLI::App* recon =
        app.add_subcommand("reconstruct", "rewrite target graphs in source style");
    add_common(recon, common);
    recon->add_option("--data", data, "target dataset");
    recon->add_option("--score", score_path, "score network checkpoint");

    CLI::App* adapt = app.add_subcommand("adapt", "full pipeline with multi-seed metrics");
    add_common(adapt, common);

    CLI::App* evaluate =
        app.add_subcommand("evaluate", "source-only baseline accuracy on the target");
    add_common(evaluate, common);

    CLI::App* sweep = app.add_subcommand("sweep", "grid over t_recon and alpha(0)");
    add_common(sweep, common);
    sweep->add_option("--t-recon", t_list, "comma list (default 0.05,0.1,0.2,0.3,0.4)");
    sweep->add_option("--alpha0", a_list, "comma list (default 0.95)");

    CLI::App* report = app.add_subcommand("report", "summarize metrics or run the scaling probe");
    add_common(report, common);
    report->add_option("--metrics", metrics_path, "metrics.json path (default <out>/metrics.json)");
    report->add_option("--scaling", scaling_sizes,
                       "comma list of target-set sizes to time instead of summarizing");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const gala::ExperimentConfig cfg = build_config(common);
        if (synth->parsed()) return cmd_synth(cfg);
        if (pretrain->parsed()) return cmd_pretrain(cfg, data, save);
        if (traind->parsed()) return cmd_train_diffusion(cfg, data, save);
        if (recon->parsed()) return cmd_reconstruct(cfg, data, score_path);
        if (adapt->parsed()) return cmd_adapt(cfg);
        if (evaluate->parsed()) return cmd_evaluate(cfg);
        if (sweep->parsed()) return cmd_sweep(cfg, t_list, a_list);
        if (report->parsed()) return cmd_report(cfg, metrics_path, scaling_sizes);
        return 1;
    } catch (const gala::IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return 2;
    } catch (const gala::FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return 2;
    } catch (const gala::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
}
