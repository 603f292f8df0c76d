#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "gala/classifier.hpp"
#include "gala/config.hpp"
#include "gala/diffusion.hpp"
#include "gala/domain_split.hpp"
#include "gala/graph_json.hpp"
#include "gala/jigsaw.hpp"
#include "gala/metrics.hpp"
#include "gala/pseudo_label.hpp"
#include "gala/synthetic.hpp"
#include "gala/tu_dataset.hpp"

namespace gala {

inline PretrainConfig pretrain_config_from(const ExperimentConfig& cfg, std::uint64_t seed) {
    PretrainConfig pc;
    pc.learning_rate = cfg.cls_lr;
    pc.epochs = cfg.cls_epochs;
    pc.batch_size = cfg.cls_batch;
    pc.seed = seed;
    pc.num_layers = cfg.cls_layers;
    pc.hidden_dim = cfg.cls_hidden;
    pc.pooling = pooling_from_name(cfg.cls_pooling);
    return pc;
}

inline DiffusionTrainConfig diffusion_config_from(const ExperimentConfig& cfg,
                                                  std::uint64_t seed) {
    DiffusionTrainConfig dc;
    dc.learning_rate = cfg.diff_lr;
    dc.epochs = cfg.diff_epochs;
    dc.batch_size = cfg.diff_batch;
    dc.ema_momentum = cfg.ema_momentum;
    dc.seed = seed;
    dc.score.num_layers = cfg.diff_layers;
    dc.score.walk_length = cfg.diff_walk;
    dc.score.node_dim = cfg.diff_node_dim;
    dc.score.edge_dim = cfg.diff_edge_dim;
    dc.score.attention = cfg.attention;
    dc.score.num_heads = cfg.attention_heads;
    return dc;
}

// Per-graph densities with index alignment preserved; single-node graphs
// (density undefined) are recorded as 0.
inline std::vector<double> dataset_densities(const Dataset& d) {
    std::vector<double> out;
    out.reserve(d.graphs.size());
    for (const Graph& g : d.graphs)
        out.push_back(g.node_count < 2 ? 0.0 : graph_density(g));
    return out;
}

inline DensityShiftReport density_shift_report(const Dataset& before, const Dataset& after,
                                               double source_mean_density) {
    if (before.graphs.size() != after.graphs.size())
        throw ArgumentError("density shift: datasets must align by index");
    return density_shift_report(dataset_densities(before), dataset_densities(after),
                                source_mean_density);
}

struct AdaptLoopResult {
    std::vector<EpochLog> epochs;
    std::vector<ThresholdDiagnostic> threshold_rows;
};

// The adaptation epoch loop over an already-reconstructed target training set:
// per epoch compute confidence records, class-specific thresholds, and the
// confident set; per batch take one Adam step on L = L_sup + L_con, where
// L_con pairs each confident graph with a random unconfident partner through a
// jigsaw exchange (teacher predictions frozen at the epoch start). If
// re_reconstruct is set, it replaces the training set at the top of each epoch
// after the first.
inline AdaptLoopResult adapt_loop(Dataset recon_train, const Dataset* recon_test,
                                  ClassifierModel& model, const ExperimentConfig& cfg,
                                  std::uint64_t seed,
                                  const std::function<Dataset(int)>& re_reconstruct = {}) {
    if (recon_train.graphs.empty()) throw ArgumentError("adaptation needs target graphs");
    if (cfg.adapt_batch < 1) throw ArgumentError("adapt batch size must be positive");

    AdaptLoopResult out;
    ParamRefs params = model.params();
    Adam opt(cfg.adapt_lr);
    opt.init(params);
    const CurriculumSchedule schedule{cfg.alpha_start, cfg.alpha_end, cfg.adapt_epochs};

    for (int epoch = 0; epoch < cfg.adapt_epochs; ++epoch) {
        if (re_reconstruct && epoch > 0) recon_train = re_reconstruct(epoch);

        const std::vector<ConfidenceRecord> records = compute_records(recon_train, model);
        const std::vector<std::optional<double>> maxima = class_max(records, model.num_classes);
        const std::vector<double> tau = thresholds(maxima, epoch, schedule);
        const std::vector<PseudoLabel> confident = select_confident(records, tau);
        for (ThresholdDiagnostic& row : threshold_diagnostics(epoch, maxima, tau, confident))
            out.threshold_rows.push_back(std::move(row));

        std::vector<bool> is_confident(records.size(), false);
        for (const PseudoLabel& p : confident) is_confident[p.graph_index] = true;
        std::vector<int> unconfident;
        for (size_t i = 0; i < records.size(); ++i)
            if (!is_confident[i]) unconfident.push_back(static_cast<int>(i));

        RngStream rng = RngStream::derive(mix_seed(seed, 0x33), epoch);
        std::vector<int> order(confident.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);

        double sup_sum = 0.0, con_sum = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += cfg.adapt_batch) {
            const size_t stop = std::min(order.size(), start + cfg.adapt_batch);
            std::vector<PseudoLabel> batch;
            for (size_t i = start; i < stop; ++i) batch.push_back(confident[order[i]]);

            ConsistencyBatch con;
            std::vector<Graph> augmented;
            augmented.reserve(2 * batch.size());  // pointers into this must stay stable
            if (!unconfident.empty()) {
                for (const PseudoLabel& p : batch) {
                    const int u = unconfident[rng.uniform_int(
                        static_cast<int>(unconfident.size()))];
                    JigsawResult jig = jigsaw_exchange(recon_train.graphs[p.graph_index],
                                                       recon_train.graphs[u], rng);
                    augmented.push_back(std::move(jig.augmented_confident));
                    con.confident.emplace_back(&augmented.back(), p.label);
                    augmented.push_back(std::move(jig.augmented_unconfident));
                    con.unconfident.emplace_back(&augmented.back(), records[u].probs);
                }
            }

            zero_grads(params);
            sup_sum += pseudo_label_loss(batch, recon_train, model);
            con_sum += consistency_loss(con, model);
            opt.step(params);
            ++batches;
        }

        EpochLog log;
        log.epoch = epoch;
        const double denom = std::max(1, batches);
        log.loss_sup = sup_sum / denom;
        log.loss_con = con_sum / denom;
        log.loss_total = log.loss_sup + log.loss_con;
        log.confident_count = static_cast<int>(confident.size());
        log.accuracy = recon_test ? classifier_accuracy(*recon_test, model) : 0.0;
        out.epochs.push_back(log);
    }
    return out;
}

struct SeedOutcome {
    SeedRun run;
    ClassifierModel model;    // adapted classifier
    ScoreNetwork score_net;   // source-trained diffusion model (EMA weights)
};

// One full pipeline pass for one seed. The source dataset is taken by value
// and its handle is destroyed before any target graph is reconstructed, so
// the adaptation phase cannot read source data by construction.
inline SeedOutcome run_single_seed(Dataset source, const Dataset& target_train,
                                   const Dataset& target_test, const ExperimentConfig& cfg,
                                   std::uint64_t seed) {
    const auto t_start = std::chrono::steady_clock::now();
    SeedOutcome out;
    out.run.seed = seed;

    const NoiseSchedule sched(cfg.beta_min, cfg.beta_max);
    const double source_density = mean_density(source);

    PretrainResult pre = pretrain_source(source, pretrain_config_from(cfg, seed));
    out.model = std::move(pre.model);

    DiffusionTrainResult diff =
        train_score_network(source, sched, diffusion_config_from(cfg, seed));
    out.score_net = std::move(diff.net);

    out.run.source_only_accuracy = classifier_accuracy(target_test, out.model);

    {
        std::optional<Dataset> holder(std::move(source));
        holder.reset();  // source-free from here on
        out.run.source_dropped = true;
    }

    // Reconstruct once and cache; training-set labels are stripped so the
    // adaptation loop cannot read them even by accident.
    Dataset recon_train = reconstruct_dataset(target_train, out.score_net, sched, cfg.t_recon,
                                              cfg.dt, mix_seed(seed, 0x31),
                                              /*keep_labels=*/false);
    Dataset recon_test = reconstruct_dataset(target_test, out.score_net, sched, cfg.t_recon,
                                             cfg.dt, mix_seed(seed, 0x32));

    {
        Dataset before = target_train;
        before.graphs.insert(before.graphs.end(), target_test.graphs.begin(),
                             target_test.graphs.end());
        Dataset after = recon_train;
        after.graphs.insert(after.graphs.end(), recon_test.graphs.begin(),
                            recon_test.graphs.end());
        out.run.shift = density_shift_report(before, after, source_density);
    }

    std::function<Dataset(int)> re_recon;
    if (cfg.re_reconstruct)
        re_recon = [&](int epoch) {
            return reconstruct_dataset(target_train, out.score_net, sched, cfg.t_recon, cfg.dt,
                                       mix_seed(mix_seed(seed, 0x34), epoch),
                                       /*keep_labels=*/false);
        };

    AdaptLoopResult loop =
        adapt_loop(std::move(recon_train), &recon_test, out.model, cfg, seed, re_recon);
    out.run.epochs = std::move(loop.epochs);
    out.run.threshold_rows = std::move(loop.threshold_rows);

    out.run.adapted_accuracy = classifier_accuracy(recon_test, out.model);
    out.run.adapted_accuracy_raw = classifier_accuracy(target_test, out.model);
    out.run.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

inline Dataset load_dataset_any(const std::string& path) {
    if (path.empty()) throw ArgumentError("dataset path is empty");
    if (std::filesystem::is_directory(path)) return parse_tu_dataset(path);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return dataset_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

// Source and target domains from config: both paths set → load them; both
// empty → generate the synthetic benchmark; anything else is an error.
inline std::pair<Dataset, Dataset> resolve_domains(const ExperimentConfig& cfg) {
    if (cfg.data_source.empty() != cfg.data_target.empty())
        throw ArgumentError("set both data.source and data.target, or neither for synthetic");
    if (cfg.data_source.empty())
        return generate_synthetic_benchmark(SyntheticSpec::from_config(cfg), cfg.seed);
    return {load_dataset_any(cfg.data_source), load_dataset_any(cfg.data_target)};
}

struct AdaptationRun {
    MetricsReport report;
    std::vector<SeedOutcome> outcomes;
};

// Multi-seed orchestration over in-memory domains. The target is split 8:2
// (stratified) per seed; its train labels are used only for the split, and its
// test labels only for scoring.
inline AdaptationRun run_adaptation_on(const Dataset& source, const Dataset& target,
                                       const ExperimentConfig& cfg) {
    if (cfg.seeds < 1) throw ArgumentError("need at least one seed");
    validate_dataset(source);
    validate_dataset(target);

    AdaptationRun out;
    out.report.task = cfg.task;
    for (int i = 0; i < cfg.seeds; ++i) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        const TrainTestSplit split =
            stratified_train_test(target, 0.8, mix_seed(seed, 0x41));
        SeedOutcome outcome = run_single_seed(source, split.train, split.test, cfg, seed);
        out.report.runs.push_back(outcome.run);
        out.outcomes.push_back(std::move(outcome));
    }
    finalize_report(out.report);
    return out;
}

inline std::string effective_out_dir(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv("GALA_OUT"); env && *env) return env;
    return cfg.out_dir;
}

// metrics.csv / metrics.json / thresholds.csv are deterministic given config +
// seed; wall-clock goes to timings.txt only.
inline void write_run_outputs(const MetricsReport& report, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/metrics.csv", metrics_csv(report));
    write_text_file(out_dir + "/metrics.json", report_to_json(report).dump(2) + "\n");
    write_text_file(out_dir + "/thresholds.csv", thresholds_csv(report));
    std::string timings;
    double total = 0.0;
    for (const SeedRun& run : report.runs) {
        timings += "seed " + std::to_string(run.seed) + ": " +
                   detail::csv_double(run.wall_seconds) + " s\n";
        total += run.wall_seconds;
    }
    timings += "total: " + detail::csv_double(total) + " s\n";
    write_text_file(out_dir + "/timings.txt", timings);
}

inline MetricsReport run_adaptation(const ExperimentConfig& cfg) {
    auto [source, target] = resolve_domains(cfg);
    AdaptationRun run = run_adaptation_on(source, target, cfg);
    write_run_outputs(run.report, effective_out_dir(cfg));
    return run.report;
}

// Frozen source model scored on raw target test graphs — the no-adaptation
// baseline. Splits match run_adaptation seed for seed.
inline MetricsReport evaluate_source_only(const ExperimentConfig& cfg) {
    auto [source, target] = resolve_domains(cfg);
    validate_dataset(source);
    validate_dataset(target);

    MetricsReport report;
    report.task = cfg.task;
    for (int i = 0; i < cfg.seeds; ++i) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        const TrainTestSplit split =
            stratified_train_test(target, 0.8, mix_seed(seed, 0x41));
        PretrainResult pre = pretrain_source(source, pretrain_config_from(cfg, seed));
        SeedRun run;
        run.seed = seed;
        run.source_only_accuracy = classifier_accuracy(split.test, pre.model);
        run.adapted_accuracy = run.source_only_accuracy;      // no adaptation performed
        run.adapted_accuracy_raw = run.source_only_accuracy;
        report.runs.push_back(std::move(run));
    }
    finalize_report(report);
    return report;
}

struct ScalingPoint {
    int size = 0;
    double seconds = 0.0;
};

struct ScalingReport {
    std::vector<ScalingPoint> points;
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    bool degenerate = false;  // fewer than two distinct sizes
};

// Measure `seconds(size)` per size and fit seconds = slope*size + intercept.
inline ScalingReport scaling_probe(const std::vector<int>& sizes,
                                   const std::function<double(int)>& measure) {
    if (sizes.empty()) throw ArgumentError("scaling probe needs at least one size");
    ScalingReport out;
    for (int s : sizes) out.points.push_back({s, measure(s)});

    std::vector<int> distinct = sizes;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) {
        out.degenerate = true;
        out.intercept = out.points.front().seconds;
        return out;
    }

    const double n = static_cast<double>(out.points.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const ScalingPoint& p : out.points) {
        sx += p.size;
        sy += p.seconds;
        sxx += static_cast<double>(p.size) * p.size;
        sxy += p.size * p.seconds;
    }
    out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    out.intercept = (sy - out.slope * sx) / n;

    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / n;
    for (const ScalingPoint& p : out.points) {
        const double fit = out.slope * p.size + out.intercept;
        ss_res += (p.seconds - fit) * (p.seconds - fit);
        ss_tot += (p.seconds - mean_y) * (p.seconds - mean_y);
    }
    out.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return out;
}

inline Dataset take_first(const Dataset& d, int k) {
    if (k < 1 || k > static_cast<int>(d.graphs.size()))
        throw ArgumentError("subset size out of range");
    Dataset out;
    out.num_classes = d.num_classes;
    out.attribute_dim = d.attribute_dim;
    out.graphs.assign(d.graphs.begin(), d.graphs.begin() + k);
    return out;
}

// Wall-clock for reconstructing the first `size` target graphs and running
// `epochs` adaptation epochs on them with a fresh copy of the classifier.
inline double time_adaptation(const Dataset& target, int size, const ClassifierModel& model,
                              ScoreNetwork& net, const NoiseSchedule& sched,
                              const ExperimentConfig& cfg, int epochs, std::uint64_t seed) {
    const Dataset subset = take_first(target, size);
    ExperimentConfig loop_cfg = cfg;
    loop_cfg.adapt_epochs = epochs;
    const auto t0 = std::chrono::steady_clock::now();
    Dataset recon = reconstruct_dataset(subset, net, sched, cfg.t_recon, cfg.dt,
                                        mix_seed(seed, 0x51), /*keep_labels=*/false);
    ClassifierModel copy = model;
    adapt_loop(std::move(recon), nullptr, copy, loop_cfg, seed);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace gala
