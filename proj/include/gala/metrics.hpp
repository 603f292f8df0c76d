#pragma once

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "gala/error.hpp"
#include "gala/pseudo_label.hpp"

namespace gala {

inline double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) throw ArgumentError("mean of an empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Sample standard deviation (Bessel, n-1); 0 for a single observation.
inline double sample_std(const std::vector<double>& xs) {
    if (xs.empty()) throw ArgumentError("std of an empty sample");
    if (xs.size() == 1) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

// One-sided exact sign test: P[Bin(n, 1/2) >= k], ties excluded by the caller.
inline double sign_test_p_value(int successes, int trials) {
    if (trials < 0 || successes < 0 || successes > trials)
        throw ArgumentError("bad sign test counts");
    if (trials == 0) return 1.0;
    double p = 0.0;
    for (int i = successes; i <= trials; ++i) {
        const double log_c = std::lgamma(trials + 1.0) - std::lgamma(i + 1.0) -
                             std::lgamma(trials - i + 1.0);
        p += std::exp(log_c - trials * std::log(2.0));
    }
    return std::min(p, 1.0);
}

struct EpochLog {
    int epoch = 0;
    double loss_sup = 0.0;
    double loss_con = 0.0;
    double loss_total = 0.0;
    int confident_count = 0;
    double accuracy = 0.0;  // on reconstructed target test
};

struct DensityShiftReport {
    double source_mean = 0.0;
    std::vector<double> before, after;
    int moved_toward = 0;
    int moved_away = 0;
    int unchanged = 0;
    double fraction_toward = 0.0;  // over all graphs
    double p_value = 1.0;          // sign test over the non-ties
};

// Did reconstruction pull each graph's density toward the source mean?
// Ties are excluded from the sign test but counted in fraction_toward's
// denominator (all graphs).
inline DensityShiftReport density_shift_report(const std::vector<double>& before,
                                               const std::vector<double>& after,
                                               double source_mean) {
    if (before.size() != after.size())
        throw ArgumentError("density shift: before/after length mismatch");
    if (before.empty()) throw ArgumentError("density shift: empty sample");
    DensityShiftReport r;
    r.source_mean = source_mean;
    r.before = before;
    r.after = after;
    for (std::size_t i = 0; i < before.size(); ++i) {
        const double db = std::abs(before[i] - source_mean);
        const double da = std::abs(after[i] - source_mean);
        if (da < db)
            ++r.moved_toward;
        else if (da > db)
            ++r.moved_away;
        else
            ++r.unchanged;
    }
    r.fraction_toward = static_cast<double>(r.moved_toward) / static_cast<double>(before.size());
    r.p_value = sign_test_p_value(r.moved_toward, r.moved_toward + r.moved_away);
    return r;
}

struct SeedRun {
    std::uint64_t seed = 0;
    double source_only_accuracy = 0.0;
    double adapted_accuracy = 0.0;      // reconstructed target test
    double adapted_accuracy_raw = 0.0;  // raw target test
    bool source_dropped = false;        // set when the source handle was released
    std::vector<EpochLog> epochs;
    std::vector<ThresholdDiagnostic> threshold_rows;
    DensityShiftReport shift;
    double wall_seconds = 0.0;  // informational; never serialized into metrics files
};

struct MetricsReport {
    std::string task;
    std::vector<SeedRun> runs;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double accuracy_raw_mean = 0.0;
    double accuracy_raw_std = 0.0;
    double source_only_mean = 0.0;
    double source_only_std = 0.0;
};

inline void finalize_report(MetricsReport& r) {
    std::vector<double> acc, raw, src;
    for (const SeedRun& run : r.runs) {
        acc.push_back(run.adapted_accuracy);
        raw.push_back(run.adapted_accuracy_raw);
        src.push_back(run.source_only_accuracy);
    }
    r.accuracy_mean = mean_of(acc);
    r.accuracy_std = sample_std(acc);
    r.accuracy_raw_mean = mean_of(raw);
    r.accuracy_raw_std = sample_std(raw);
    r.source_only_mean = mean_of(src);
    r.source_only_std = sample_std(src);
}

namespace detail {
inline std::string csv_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace detail

// Deterministic per-epoch table (no wall-clock columns, so identical runs
// produce byte-identical files).
inline std::string metrics_csv(const MetricsReport& r) {
    std::string out = "task,seed,epoch,loss_sup,loss_con,loss_total,confident_count,accuracy\n";
    for (const SeedRun& run : r.runs)
        for (const EpochLog& e : run.epochs)
            out += r.task + "," + std::to_string(run.seed) + "," + std::to_string(e.epoch) + "," +
                   detail::csv_double(e.loss_sup) + "," + detail::csv_double(e.loss_con) + "," +
                   detail::csv_double(e.loss_total) + "," + std::to_string(e.confident_count) +
                   "," + detail::csv_double(e.accuracy) + "\n";
    return out;
}

inline std::string thresholds_csv(const MetricsReport& r) {
    std::string out = "seed,epoch,class,M_c,tau_c,confident_count,class_share\n";
    for (const SeedRun& run : r.runs)
        for (const ThresholdDiagnostic& d : run.threshold_rows)
            out += std::to_string(run.seed) + "," + std::to_string(d.epoch) + "," +
                   std::to_string(d.cls) + "," +
                   (d.class_maximum ? detail::csv_double(*d.class_maximum) : "absent") + "," +
                   detail::csv_double(d.tau) + "," + std::to_string(d.confident_count) + "," +
                   detail::csv_double(d.class_share) + "\n";
    return out;
}

inline nlohmann::json shift_to_json(const DensityShiftReport& s) {
    return {{"source_mean", s.source_mean},      {"moved_toward", s.moved_toward},
            {"moved_away", s.moved_away},        {"unchanged", s.unchanged},
            {"fraction_toward", s.fraction_toward}, {"p_value", s.p_value},
            {"density_before", s.before},        {"density_after", s.after}};
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json runs = nlohmann::json::array();
    for (const SeedRun& run : r.runs) {
        nlohmann::json epochs = nlohmann::json::array();
        for (const EpochLog& e : run.epochs)
            epochs.push_back({{"epoch", e.epoch},
                              {"loss_sup", e.loss_sup},
                              {"loss_con", e.loss_con},
                              {"loss_total", e.loss_total},
                              {"confident_count", e.confident_count},
                              {"accuracy", e.accuracy}});
        runs.push_back({{"seed", run.seed},
                        {"source_only_accuracy", run.source_only_accuracy},
                        {"adapted_accuracy", run.adapted_accuracy},
                        {"adapted_accuracy_raw", run.adapted_accuracy_raw},
                        {"source_dropped", run.source_dropped},
                        {"density_shift", shift_to_json(run.shift)},
                        {"epochs", std::move(epochs)}});
    }
    return {{"task", r.task},
            {"runs", std::move(runs)},
            {"accuracy_mean", r.accuracy_mean},
            {"accuracy_std", r.accuracy_std},
            {"accuracy_raw_mean", r.accuracy_raw_mean},
            {"accuracy_raw_std", r.accuracy_raw_std},
            {"source_only_mean", r.source_only_mean},
            {"source_only_std", r.source_only_std}};
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace gala
