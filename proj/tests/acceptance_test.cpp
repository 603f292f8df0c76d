// Acceptance gate: one printed line per criterion, each stating the measured
// values against its tolerance. Criteria run in order; 8-10 share one
// end-to-end pipeline fixture. Criterion 11 is informational and runs only
// when GALA_DATA_DIR points at a directory containing ENZYMES.
#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <memory>

#include "gala/trainer.hpp"

using namespace gala;

namespace {

class Stopwatch {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    EXPECT_TRUE(ok) << "criterion " << criterion << ": " << detail;
}

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return buf;
}

Graph random_acceptance_graph(int n, double p, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform() < p) edges.emplace_back(i, j);
    return make_graph(n, std::move(edges), Eigen::MatrixXd::Zero(n, 0), std::nullopt);
}

// Configuration shared by criteria 8-10: the synthetic two-domain benchmark
// at full size with a training budget that fits a desk machine.
ExperimentConfig benchmark_config() {
    ExperimentConfig cfg;
    cfg.task = "acceptance";
    cfg.seeds = 5;
    cfg.seed = 0;
    cfg.diff_lr = 1e-3;
    cfg.diff_epochs = 60;
    return cfg;
}

struct PipelineFixture {
    ExperimentConfig cfg = benchmark_config();
    Dataset source, target;
    AdaptationRun run;
    MetricsReport source_only;
    double build_seconds = 0.0;
};

const PipelineFixture& pipeline() {
    static const std::unique_ptr<PipelineFixture> fx = [] {
        auto f = std::make_unique<PipelineFixture>();
        const Stopwatch watch;
        std::tie(f->source, f->target) = resolve_domains(f->cfg);
        f->run = run_adaptation_on(f->source, f->target, f->cfg);
        f->source_only = evaluate_source_only(f->cfg);
        f->build_seconds = watch.seconds();
        return f;
    }();
    return *fx;
}

double share_entropy(const std::vector<PseudoLabel>& confident, int num_classes) {
    if (confident.empty()) return 0.0;
    std::vector<double> counts(num_classes, 0.0);
    for (const PseudoLabel& p : confident) counts[p.label] += 1.0;
    double h = 0.0;
    for (double c : counts)
        if (c > 0.0) {
            const double share = c / static_cast<double>(confident.size());
            h -= share * std::log(share);
        }
    return h;
}

}  // namespace

TEST(Acceptance, Criterion01ForwardMarginals) {
    const Stopwatch watch;
    Eigen::MatrixXd a0(2, 2);
    a0 << 0, 1, 1, 0;
    const NoiseSchedule sched;
    RngStream rng(2024);
    const int draws = 100000;
    double worst_mean_err = 0.0, worst_sd_rel = 0.0;
    for (const double t : {0.1, 0.5, 1.0}) {
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < draws; ++i) {
            const double x = forward_perturb(a0, t, sched, rng).a(0, 1);
            sum += x;
            sum_sq += x * x;
        }
        const double mean = sum / draws;
        const double sd = std::sqrt(sum_sq / draws - mean * mean);
        worst_mean_err = std::max(worst_mean_err, std::abs(mean - sched.mean_scale(t)));
        worst_sd_rel =
            std::max(worst_sd_rel, std::abs(sd - sched.stddev(t)) / sched.stddev(t));
    }
    const double secs = watch.seconds();
    const bool ok = worst_mean_err <= 0.01 && worst_sd_rel <= 0.01 && secs < 10.0;
    report(1, ok,
           fmt("forward marginals over 1e5 draws at t in {0.1,0.5,1}: worst |mean-m(t)| %.2g "
               "(tol 0.01 on unit-scale entries), worst std rel err %.2g (tol 0.01), %.1f s "
               "(budget 10 s)",
               worst_mean_err, worst_sd_rel, secs));
}

TEST(Acceptance, Criterion02GradientCorrectness) {
    const Stopwatch watch;
    double worst = 0.0;
    int checked = 0;
    const double h = 1e-6;

    // classifier: batch gradients on a labeled toy set
    {
        Dataset d;
        d.num_classes = 2;
        d.attribute_dim = 3;
        RngStream gen(12);
        for (int i = 0; i < 4; ++i) {
            Graph g = random_acceptance_graph(6, 0.5, 300 + i);
            g.node_attributes = gen.gaussian_matrix(6, 3);
            g.label = i % 2;
            d.graphs.push_back(std::move(g));
        }
        ClassifierModel m = make_classifier(3, 2, 5);
        ParamRefs params = m.params();
        RngStream nudge(7);
        for (Param* p : params)
            p->value += 0.05 * nudge.gaussian_matrix(p->value.rows(), p->value.cols());

        const auto loss_at = [&]() {
            double loss = 0.0;
            for (const Graph& g : d.graphs)
                loss += cross_entropy(classifier_forward(g, m).logits, *g.label);
            return loss / static_cast<double>(d.graphs.size());
        };
        std::vector<const Graph*> batch;
        for (const Graph& g : d.graphs) batch.push_back(&g);
        zero_grads(params);
        classifier_batch_gradients(batch, m);
        RngStream pick(21);
        for (int k = 0; k < 60; ++k) {
            Param* p = params[pick.uniform_int(static_cast<int>(params.size()))];
            const Eigen::Index r = pick.uniform_int(static_cast<int>(p->value.rows()));
            const Eigen::Index c = pick.uniform_int(static_cast<int>(p->value.cols()));
            const double saved = p->value(r, c);
            p->value(r, c) = saved + h;
            const double up = loss_at();
            p->value(r, c) = saved - h;
            const double down = loss_at();
            p->value(r, c) = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = p->grad(r, c);
            worst = std::max(worst,
                             std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)}));
            ++checked;
        }
    }

    // score network: random symmetric cotangent on the forward output
    {
        ScoreConfig sc;
        sc.num_layers = 2;
        sc.node_dim = 8;
        sc.edge_dim = 8;
        ScoreNetwork net = make_score_network(sc, 17);
        ParamRefs params = net.params();
        RngStream nudge(31);
        for (Param* p : params)
            p->value += 0.05 * nudge.gaussian_matrix(p->value.rows(), p->value.cols());

        const Eigen::MatrixXd a = adjacency_matrix(random_acceptance_graph(5, 0.5, 13));
        const double t = 0.3;
        RngStream dr(71);
        const Eigen::MatrixXd dout = dr.symmetric_gaussian(5);
        zero_grads(params);
        const ScoreTrace trace = score_forward_trace(a, t, net);
        score_backward(trace, dout, net);
        const auto loss_at = [&]() {
            return (score_forward(a, t, net).array() * dout.array()).sum();
        };
        RngStream pick(5);
        for (int k = 0; k < 60; ++k) {
            Param* p = params[pick.uniform_int(static_cast<int>(params.size()))];
            const Eigen::Index r = pick.uniform_int(static_cast<int>(p->value.rows()));
            const Eigen::Index c = pick.uniform_int(static_cast<int>(p->value.cols()));
            const double saved = p->value(r, c);
            p->value(r, c) = saved + h;
            const double up = loss_at();
            p->value(r, c) = saved - h;
            const double down = loss_at();
            p->value(r, c) = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = p->grad(r, c);
            worst = std::max(worst,
                             std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)}));
            ++checked;
        }
    }

    const double secs = watch.seconds();
    const bool ok = worst < 1e-4 && checked >= 100 && secs < 120.0;
    report(2, ok,
           fmt("%d parameter coordinates vs central differences: worst rel err %.2e "
               "(tol 1e-4), %.1f s (budget 120 s)",
               checked, worst, secs));
}

TEST(Acceptance, Criterion03AnalyticScoreReconstruction) {
    const Stopwatch watch;
    const Graph g = random_acceptance_graph(20, 0.25, 42);
    const Eigen::MatrixXd a0 = adjacency_matrix(g);
    const NoiseSchedule sched;
    const ScoreFn score = [&](const Eigen::MatrixXd& a_t, double t) {
        return analytic_score(a_t, a0, t, sched);
    };
    double total = 0.0;
    const int trials = 20;
    for (int trial = 0; trial < trials; ++trial) {
        RngStream rng = RngStream::derive(1000, trial);
        const Graph rec = adapt_target_graph(g, score, sched, 0.1, 1e-3, rng);
        const Eigen::MatrixXd b = adjacency_matrix(rec);
        int agree = 0, pairs = 0;
        for (int i = 0; i < 20; ++i)
            for (int j = i + 1; j < 20; ++j) {
                agree += a0(i, j) == b(i, j);
                ++pairs;
            }
        total += static_cast<double>(agree) / pairs;
    }
    const double acc = total / trials;
    const double secs = watch.seconds();
    const bool ok = acc >= 0.95 && secs < 60.0;
    report(3, ok,
           fmt("analytic-score reconstruction of a memorized 20-node graph at t_recon=0.1, "
               "dt=1e-3: %.4f edge-indicator accuracy over %d trials (tol >= 0.95), %.1f s "
               "(budget 60 s)",
               acc, trials, secs));
}

TEST(Acceptance, Criterion04ScoreTrainingSanity) {
    const Stopwatch watch;
    Dataset d;
    d.num_classes = 1;
    d.attribute_dim = 0;
    d.graphs.push_back(make_graph(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}},
                                  Eigen::MatrixXd::Zero(6, 0), 0));
    const NoiseSchedule sched;
    DiffusionTrainConfig cfg;
    cfg.epochs = 600;
    cfg.learning_rate = 1e-3;
    cfg.seed = 1;
    const DiffusionTrainResult r = train_score_network(d, sched, cfg);

    double tail = 0.0;
    for (size_t i = r.epoch_losses.size() - 10; i < r.epoch_losses.size(); ++i)
        tail += r.epoch_losses[i] / 10.0;
    const double ratio = tail / r.epoch_losses.front();

    const ScoreFn zero = [](const Eigen::MatrixXd& a, double) {
        return Eigen::MatrixXd::Zero(a.rows(), a.cols());
    };
    const double baseline = score_matching_loss(zero, d, sched, 256, 1e-3, 99);
    const double trained = score_matching_loss(network_score(r.net), d, sched, 256, 1e-3, 99);

    const double secs = watch.seconds();
    const bool ok = ratio <= 0.5 && trained < baseline && secs < 600.0;
    report(4, ok,
           fmt("single-graph score training, 600 epochs: tail-10 loss / epoch-1 loss = %.3f "
               "(tol <= 0.5), trained eval %.2f < zero-score baseline %.2f, %.1f s "
               "(budget 600 s)",
               ratio, trained, baseline, secs));
}

TEST(Acceptance, Criterion05LouvainOracle) {
    const Stopwatch watch;

    // exhaustive best modularity via restricted growth strings
    const auto brute_best = [](const Graph& g) {
        const int n = g.node_count;
        std::vector<int> rgs(n, 0), maxes(n, 0);
        double best = -1.0;
        while (true) {
            Partition p;
            p.community_of = rgs;
            p.num_communities = *std::max_element(rgs.begin(), rgs.end()) + 1;
            best = std::max(best, modularity(g, p));
            int i = n - 1;
            while (i > 0 && rgs[i] == maxes[i - 1] + 1) --i;
            if (i == 0) break;
            ++rgs[i];
            maxes[i] = std::max(maxes[i - 1], rgs[i]);
            for (int j = i + 1; j < n; ++j) {
                rgs[j] = 0;
                maxes[j] = maxes[i];
            }
        }
        return best;
    };

    double worst_gap = 0.0;
    int evaluated = 0;
    for (std::uint64_t seed = 0; evaluated < 50; ++seed) {
        const int n = 4 + static_cast<int>(seed % 5);
        const Graph g = random_acceptance_graph(n, 0.45, 5000 + seed);
        if (g.edge_count() == 0) continue;
        const double gap = brute_best(g) - modularity(g, louvain_communities(g, seed));
        worst_gap = std::max(worst_gap, gap);
        ++evaluated;
    }

    const Graph tri = make_graph(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}},
                                 Eigen::MatrixXd::Zero(6, 0), std::nullopt);
    const Partition p = louvain_communities(tri, 7);
    const double q_tri = modularity(tri, p);

    const double secs = watch.seconds();
    const bool ok = worst_gap <= 0.05 && q_tri == 0.5 && p.num_communities == 2 && secs < 120.0;
    report(5, ok,
           fmt("Louvain vs brute force on %d graphs (<= 8 nodes): worst modularity gap %.4f "
               "(tol 0.05); two disconnected triangles Q = %.2f with %d communities "
               "(exact 0.5, 2), %.1f s (budget 120 s)",
               evaluated, worst_gap, q_tri, p.num_communities, secs));
}

TEST(Acceptance, Criterion06PseudoLabelUnbiasedness) {
    const Stopwatch watch;

    // coverage property: the class-argmax record always clears tau_c = M_c * alpha
    // while alpha < 1
    bool coverage = true;
    RngStream gen(40);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<ConfidenceRecord> records;
        for (int i = 0; i < 30; ++i) {
            const double p = 0.5 + 0.5 * gen.uniform();
            Eigen::VectorXd probs(2);
            if (gen.uniform() < 0.5)
                probs << p, 1 - p;
            else
                probs << 1 - p, p;
            records.push_back(make_record(i, probs));
        }
        const auto maxima = class_max(records, 2);
        CurriculumSchedule sched{0.95, 0.99, 10};
        for (int epoch = 0; epoch < 10; ++epoch) {
            const auto confident =
                select_confident(records, thresholds(maxima, epoch, sched));
            for (int c = 0; c < 2; ++c) {
                if (!maxima[c]) continue;
                bool found = false;
                for (const PseudoLabel& pl : confident) found |= pl.label == c;
                coverage &= found;
            }
        }
    }

    // skewed-confidence corpus: class 0 confident (0.96-0.995), class 1 weaker
    // (0.80-0.92); a fixed 0.95 threshold silences class 1 entirely
    std::vector<ConfidenceRecord> skewed;
    RngStream skew(77);
    for (int i = 0; i < 12; ++i) {
        Eigen::VectorXd p0(2), p1(2);
        const double c0 = 0.96 + 0.035 * skew.uniform();
        const double c1 = 0.80 + 0.12 * skew.uniform();
        p0 << c0, 1 - c0;
        p1 << 1 - c1, c1;
        skewed.push_back(make_record(2 * i, p0));
        skewed.push_back(make_record(2 * i + 1, p1));
    }
    const auto maxima = class_max(skewed, 2);
    const CurriculumSchedule sched{0.95, 0.99, 10};
    const auto class_specific = select_confident(skewed, thresholds(maxima, 0, sched));
    const auto fixed = select_confident(skewed, {0.95, 0.95});
    const double h_specific = share_entropy(class_specific, 2);
    const double h_fixed = share_entropy(fixed, 2);

    const double secs = watch.seconds();
    const bool ok = coverage && h_specific >= h_fixed && secs < 10.0;
    report(6, ok,
           fmt("per-class coverage holds over 200 record sets x 10 epochs; skewed-corpus "
               "class-share entropy %.3f nats with class-specific thresholds >= %.3f with "
               "fixed 0.95, %.1f s (budget 10 s)",
               h_specific, h_fixed, secs));
}

TEST(Acceptance, Criterion07CurriculumMonotonicity) {
    const Stopwatch watch;
    const CurriculumSchedule sched{0.95, 0.99, 20};
    bool alpha_monotone = true;
    for (int e = 1; e < 25; ++e) alpha_monotone &= sched.alpha(e) >= sched.alpha(e - 1);

    RngStream gen(11);
    std::vector<ConfidenceRecord> records;
    for (int i = 0; i < 100; ++i) {
        const double p = 0.5 + 0.5 * gen.uniform();
        Eigen::VectorXd probs(2);
        if (gen.uniform() < 0.5)
            probs << p, 1 - p;
        else
            probs << 1 - p, p;
        records.push_back(make_record(i, probs));
    }
    const auto maxima = class_max(records, 2);
    bool non_growing = true;
    size_t prev = records.size() + 1;
    for (int e = 0; e < 20; ++e) {
        const size_t count = select_confident(records, thresholds(maxima, e, sched)).size();
        non_growing &= count <= prev;
        prev = count;
    }

    const double secs = watch.seconds();
    const bool ok = alpha_monotone && non_growing && secs < 1.0;
    report(7, ok,
           fmt("alpha(e) nondecreasing over 25 epochs and confident set non-growing over 20 "
               "epochs for frozen records, %.2f s (budget 1 s)",
               secs));
}

TEST(Acceptance, Criterion08EndToEndAdaptation) {
    const PipelineFixture& fx = pipeline();
    const double gain = fx.run.report.accuracy_mean - fx.source_only.source_only_mean;
    const bool ok = gain >= 0.05 && fx.build_seconds <= 1800.0;
    report(8, ok,
           fmt("SBM two-domain benchmark (200+200 graphs, 5 seeds): adapted accuracy %.3f "
               "vs source-only %.3f, gain %+.1f pp (tol >= +5 pp), %.0f s (budget 1800 s)",
               fx.run.report.accuracy_mean, fx.source_only.source_only_mean, gain * 100.0,
               fx.build_seconds));
}

TEST(Acceptance, Criterion09DensityShiftDirection) {
    const Stopwatch watch;
    const PipelineFixture& fx = pipeline();
    bool ok = true;
    double worst_fraction = 1.0, worst_p = 0.0;
    for (const SeedRun& run : fx.run.report.runs) {
        ok &= run.shift.before.size() == 200u;
        worst_fraction = std::min(worst_fraction, run.shift.fraction_toward);
        worst_p = std::max(worst_p, run.shift.p_value);
    }
    ok &= worst_fraction > 0.5 && worst_p < 0.05;
    const double secs = watch.seconds();
    report(9, ok,
           fmt("reconstruction density shift over 200 target graphs per seed: worst "
               "fraction-toward-source %.3f (tol > 0.5), worst sign-test p %.2g (tol < 0.05), "
               "+%.1f s on the shared pipeline (budget 600 s)",
               worst_fraction, worst_p, secs));
}

TEST(Acceptance, Criterion10LinearScaling) {
    const Stopwatch watch;
    const PipelineFixture& fx = pipeline();
    const SeedOutcome& outcome = fx.run.outcomes.front();
    const NoiseSchedule sched(fx.cfg.beta_min, fx.cfg.beta_max);

    // median of 3 wall-clock measurements per size to damp scheduler noise
    const auto measure = [&](int size) {
        std::vector<double> times;
        for (int rep = 0; rep < 3; ++rep) {
            ScoreNetwork net = outcome.score_net;
            times.push_back(time_adaptation(fx.target, size, outcome.model, net, sched,
                                            fx.cfg, 3, 123 + rep));
        }
        std::sort(times.begin(), times.end());
        return times[1];
    };
    const double t1 = measure(16);
    const double t2 = measure(32);
    const double ratio = t2 / t1;

    const double secs = watch.seconds();
    const bool ok = ratio >= 1.6 && ratio <= 2.6 && secs < 600.0;
    report(10, ok,
           fmt("adaptation wall-clock doubling target count 16 -> 32: ratio %.2f "
               "(tol [1.6, 2.6]; median of 3), %.1f s (budget 600 s)",
               ratio, secs));
}

TEST(Acceptance, Criterion11EnzymesStretch) {
    const char* data_dir = std::getenv("GALA_DATA_DIR");
    if (!data_dir || !*data_dir) {
        std::printf(
            "[SKIP] criterion 11: GALA_DATA_DIR not set; ENZYMES stretch reproduction is "
            "informational and was not run\n");
        std::fflush(stdout);
        GTEST_SKIP();
    }

    const Stopwatch watch;
    const Dataset enzymes = parse_tu_dataset(std::string(data_dir) + "/ENZYMES");
    const std::vector<Dataset> groups = split_by_density(enzymes, 4);

    ExperimentConfig cfg;
    cfg.task = "enzymes";
    cfg.seeds = 1;

    double total = 0.0, total_baseline = 0.0;
    int tasks = 0;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            if (i == j) continue;
            const AdaptationRun run = run_adaptation_on(groups[i], groups[j], cfg);
            total += run.report.accuracy_mean;
            total_baseline += run.report.source_only_mean;
            ++tasks;
            std::printf("  enzymes task %d->%d: source-only %.3f adapted %.3f\n", i, j,
                        run.report.source_only_mean, run.report.accuracy_mean);
            std::fflush(stdout);
        }
    }
    const double avg = total / tasks;
    const double avg_baseline = total_baseline / tasks;
    const bool ok = avg > 0.257;
    report(11, ok,
           fmt("ENZYMES 12-task average: adapted %.3f (report target > 0.257, measured "
               "source-only baseline %.3f), %.0f s — informational stretch",
               avg, avg_baseline, watch.seconds()));
}
