#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "gala/graph.hpp"
#include "gala/graph_json.hpp"
#include "gala/noise_schedule.hpp"
#include "gala/rng.hpp"
#include "gala/score_network.hpp"

namespace gala {

// Score evaluated at (A_t, t); lets tests plug the analytic score into the integrator.
using ScoreFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, double)>;

inline ScoreFn network_score(const ScoreNetwork& net) {
    return [&net](const Eigen::MatrixXd& a, double t) { return score_forward(a, t, net); };
}

namespace detail {
inline void require_adjacency_like(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw ContractError("adjacency must be square");
    if ((a - a.transpose()).cwiseAbs().maxCoeff() != 0.0)
        throw ContractError("adjacency must be symmetric");
    if (a.diagonal().cwiseAbs().maxCoeff() != 0.0)
        throw ContractError("adjacency must have zero diagonal");
}

inline int reverse_step_count(double t_span, double dt) {
    if (!(dt > 0.0)) throw ContractError("step size must be positive");
    const int steps = static_cast<int>(std::llround(t_span / dt));
    if (steps < 1 || std::abs(t_span - steps * dt) > 1e-9)
        throw ContractError("step size must divide the integration span");
    return steps;
}
}  // namespace detail

// Closed-form VP forward marginal: A(t) = A0 m(t) + sqrt(v(t)) eps.
inline DiffusionState forward_perturb(const Eigen::MatrixXd& a0, double t,
                                      const NoiseSchedule& sched, RngStream& rng) {
    detail::require_adjacency_like(a0);
    if (a0.size() > 0 && (a0.minCoeff() < 0.0 || a0.maxCoeff() > 1.0))
        throw ContractError("clean adjacency entries must lie in [0, 1]");
    if (!(t > 0.0 && t <= 1.0)) throw ArgumentError("perturbation time must be in (0, 1]");
    const int n = static_cast<int>(a0.rows());
    DiffusionState s;
    s.a = a0 * sched.mean_scale(t) + sched.stddev(t) * rng.symmetric_gaussian(n);
    s.t = t;
    return s;
}

// Gradient of log p_{0t}(A_t | A0): the score-matching regression target.
inline Eigen::MatrixXd analytic_score(const Eigen::MatrixXd& a_t, const Eigen::MatrixXd& a0,
                                      double t, const NoiseSchedule& sched) {
    if (!(t > 0.0)) throw ArgumentError("conditional variance is singular at t = 0");
    if (t > 1.0) throw ArgumentError("time must be in (0, 1]");
    if (a_t.rows() != a0.rows() || a_t.cols() != a0.cols())
        throw ShapeError("score operands must share a shape");
    return -(a_t - a0 * sched.mean_scale(t)) / sched.variance(t);
}

// One Euler-Maruyama step of the reverse SDE, t -> t - dt.
inline DiffusionState reverse_step(const DiffusionState& state, double dt, const ScoreFn& score,
                                   const NoiseSchedule& sched, RngStream& rng) {
    // tolerance: integrate_reverse recomputes t as t0 - i*dt, which can land an
    // ulp below dt on the final step
    if (!(dt > 0.0) || state.t < dt * (1.0 - 1e-9))
        throw ContractError("reverse step needs state.t >= dt > 0");
    const int n = static_cast<int>(state.a.rows());
    const double b = sched.beta(state.t);
    Eigen::MatrixXd a = state.a + (0.5 * b * state.a + b * score(state.a, state.t)) * dt +
                        std::sqrt(b) * std::sqrt(dt) * rng.symmetric_gaussian(n);
    a = 0.5 * (a + a.transpose()).eval();
    a.diagonal().setZero();
    return DiffusionState{std::move(a), state.t - dt};
}

// Integrates the reverse SDE from state.t down to 0 and returns the final matrix.
inline Eigen::MatrixXd integrate_reverse(DiffusionState state, double dt, const ScoreFn& score,
                                         const NoiseSchedule& sched, RngStream& rng) {
    const int steps = detail::reverse_step_count(state.t, dt);
    const double t0 = state.t;
    for (int i = 0; i < steps; ++i) {
        state = reverse_step(state, dt, score, sched, rng);
        state.t = t0 - (i + 1) * dt;  // avoid accumulation drift
    }
    return std::move(state.a);
}

inline std::vector<Edge> threshold_edges(const Eigen::MatrixXd& a) {
    std::vector<Edge> edges;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = i + 1; j < a.cols(); ++j)
            if (a(i, j) > 0.5) edges.emplace_back(i, j);
    return edges;
}

// Noise a target graph to t_recon, denoise back to 0 with the learned score,
// and threshold. Topology changes; attributes and node count pass through.
inline Graph adapt_target_graph(const Graph& g, const ScoreFn& score, const NoiseSchedule& sched,
                                double t_recon, double dt, RngStream& rng) {
    if (!(t_recon > 0.0 && t_recon < 1.0)) throw ArgumentError("t_recon must be in (0, 1)");
    DiffusionState s = forward_perturb(adjacency_matrix(g), t_recon, sched, rng);
    const Eigen::MatrixXd a = integrate_reverse(std::move(s), dt, score, sched, rng);
    return make_graph(g.node_count, threshold_edges(a), g.node_attributes, std::nullopt);
}

inline Graph adapt_target_graph(const Graph& g, ScoreNetwork& net, const NoiseSchedule& sched,
                                double t_recon, double dt, RngStream& rng) {
    if (!score_params_finite(net)) throw ModelError("score network has non-finite parameters");
    return adapt_target_graph(g, network_score(net), sched, t_recon, dt, rng);
}

// Draw A(1) from the symmetric Gaussian prior and integrate to t = 0.
inline Graph sample_prior(int n_nodes, ScoreNetwork& net, const NoiseSchedule& sched, double dt,
                          RngStream& rng) {
    if (n_nodes < 1) throw ArgumentError("prior sample needs at least one node");
    if (!score_params_finite(net)) throw ModelError("score network has non-finite parameters");
    DiffusionState s{rng.symmetric_gaussian(n_nodes), 1.0};
    const Eigen::MatrixXd a = integrate_reverse(std::move(s), dt, network_score(net), sched, rng);
    return make_graph(n_nodes, threshold_edges(a), Eigen::MatrixXd::Zero(n_nodes, 0), std::nullopt);
}

struct DiffusionTrainConfig {
    double learning_rate = 2e-5;
    int epochs = 200;
    int batch_size = 128;
    double ema_momentum = 0.9999;
    double t_eps = 1e-3;  // lower end of the training-time distribution
    std::uint64_t seed = 0;
    ScoreConfig score;
};

struct DiffusionTrainResult {
    ScoreNetwork net;  // EMA weights already applied
    std::vector<double> epoch_losses;
};

// Denoising score matching: E_t v(t) || rho(A(t), t) - analytic score ||_F^2
// with t ~ U(t_eps, 1); the v(t) weight makes this the noise-prediction loss.
inline DiffusionTrainResult train_score_network(const Dataset& source, const NoiseSchedule& sched,
                                                const DiffusionTrainConfig& cfg) {
    if (source.graphs.empty()) throw ArgumentError("diffusion training needs a nonempty dataset");

    DiffusionTrainResult out;
    out.net = make_score_network(cfg.score, mix_seed(cfg.seed, 0x21));
    ParamRefs params = out.net.params();
    Adam opt(cfg.learning_rate);
    opt.init(params);
    Ema ema(cfg.ema_momentum);
    ema.init(params);
    RngStream rng(mix_seed(cfg.seed, 0x22));

    std::vector<Eigen::MatrixXd> adjacency;
    adjacency.reserve(source.graphs.size());
    for (const Graph& g : source.graphs) adjacency.push_back(adjacency_matrix(g));

    const int steps_per_epoch =
        std::max<int>(1, static_cast<int>((source.graphs.size() + cfg.batch_size - 1) / cfg.batch_size));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            zero_grads(params);
            double batch_loss = 0.0;
            const double inv_b = 1.0 / cfg.batch_size;
            for (int b = 0; b < cfg.batch_size; ++b) {
                const Eigen::MatrixXd& a0 = adjacency[rng.uniform_int(adjacency.size())];
                const int n = static_cast<int>(a0.rows());
                const double t = rng.uniform(cfg.t_eps, 1.0);
                const double sd = sched.stddev(t), v = sched.variance(t);
                const Eigen::MatrixXd eps = rng.symmetric_gaussian(n);
                const Eigen::MatrixXd a_t = a0 * sched.mean_scale(t) + sd * eps;
                const Eigen::MatrixXd target = -eps / sd;
                const ScoreTrace trace = score_forward_trace(a_t, t, out.net);
                const Eigen::MatrixXd diff = trace.output - target;
                batch_loss += v * diff.squaredNorm() * inv_b;
                score_backward(trace, Eigen::MatrixXd(2.0 * v * inv_b * diff), out.net);
            }
            if (!std::isfinite(batch_loss)) throw ModelError("score-matching loss diverged");
            opt.step(params);
            ema.update(params);
            epoch_loss += batch_loss;
        }
        out.epoch_losses.push_back(epoch_loss / steps_per_epoch);
    }
    ema.copy_to(params);
    return out;
}

// Deterministic evaluation batch for comparing score functions (same seed ->
// identical (graph, t, eps) draws).
inline double score_matching_loss(const ScoreFn& score, const Dataset& d,
                                  const NoiseSchedule& sched, int batch, double t_eps,
                                  std::uint64_t seed) {
    if (d.graphs.empty()) throw ArgumentError("evaluation needs a nonempty dataset");
    RngStream rng(seed);
    double loss = 0.0;
    for (int b = 0; b < batch; ++b) {
        const Eigen::MatrixXd a0 = adjacency_matrix(d.graphs[rng.uniform_int(d.graphs.size())]);
        const int n = static_cast<int>(a0.rows());
        const double t = rng.uniform(t_eps, 1.0);
        const double sd = sched.stddev(t);
        const Eigen::MatrixXd eps = rng.symmetric_gaussian(n);
        const Eigen::MatrixXd a_t = a0 * sched.mean_scale(t) + sd * eps;
        loss += sched.variance(t) * (score(a_t, t) + eps / sd).squaredNorm();
    }
    return loss / batch;
}

// Reconstruct every graph with an independent per-graph stream so results do
// not depend on iteration order. Labels are carried through for later scoring
// (the adaptation itself never reads them); pass keep_labels=false to strip.
inline Dataset reconstruct_dataset(const Dataset& d, ScoreNetwork& net, const NoiseSchedule& sched,
                                   double t_recon, double dt, std::uint64_t seed,
                                   bool keep_labels = true) {
    if (!score_params_finite(net)) throw ModelError("score network has non-finite parameters");
    const ScoreFn score = network_score(net);
    Dataset out;
    out.num_classes = d.num_classes;
    out.attribute_dim = d.attribute_dim;
    out.graphs.resize(d.graphs.size());
    for (size_t i = 0; i < d.graphs.size(); ++i) {
        RngStream rng = RngStream::derive(seed, i);
        out.graphs[i] = adapt_target_graph(d.graphs[i], score, sched, t_recon, dt, rng);
        if (keep_labels) out.graphs[i].label = d.graphs[i].label;
    }
    return out;
}

// Canonical dataset JSON plus a provenance stamp describing the run.
inline nlohmann::json reconstruction_dump(const Dataset& d, double t_recon, double dt,
                                          std::uint64_t seed) {
    nlohmann::json j = dataset_to_json(d);
    j["provenance"] = {{"t_recon", t_recon},
                       {"steps", detail::reverse_step_count(t_recon, dt)},
                       {"seed", seed}};
    return j;
}

}  // namespace gala
