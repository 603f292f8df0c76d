#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "gala/nn.hpp"
#include "gala/rng.hpp"

namespace gala {

// 1[A > 1/2] edge indicator used for all discrete structure inside the score net.
inline Eigen::MatrixXd threshold_adjacency(const Eigen::MatrixXd& a_t) {
    return (a_t.array() > 0.5).cast<double>();
}

// Column-normalized transition matrix R = A_dot * D^{-1}; zero-degree columns stay zero.
inline Eigen::MatrixXd walk_transition(const Eigen::MatrixXd& a_dot) {
    const Eigen::Index n = a_dot.rows();
    const Eigen::VectorXd deg = a_dot.colwise().sum();
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        if (deg(j) > 0.0) r.col(j) = a_dot.col(j) / deg(j);
    return r;
}

// Row p = i*n + j holds [R(i,j), R^2(i,j), ..., R^r(i,j)]: the k-step walk
// likelihoods between every ordered node pair.
inline Eigen::MatrixXd random_walk_features(const Eigen::MatrixXd& a_t, int r) {
    if (a_t.rows() != a_t.cols()) throw ArgumentError("walk features need a square matrix");
    if (r < 1) throw ArgumentError("walk length must be positive");
    const Eigen::Index n = a_t.rows();
    const Eigen::MatrixXd ratio = walk_transition(threshold_adjacency(a_t));
    Eigen::MatrixXd walk(n * n, r);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
    for (int k = 0; k < r; ++k) {
        power = power * ratio;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) walk(i * n + j, k) = power(i, j);
    }
    return walk;
}

// Transformer-style embedding of diffusion time (t scaled into step units).
inline Eigen::VectorXd sinusoidal_time_embedding(double t, int dim) {
    if (dim < 2 || dim % 2 != 0) throw ArgumentError("time embedding dim must be even and >= 2");
    const int half = dim / 2;
    const double scaled = t * 1000.0;
    Eigen::VectorXd emb(dim);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / std::max(half - 1, 1));
        emb(i) = std::sin(scaled * freq);
        emb(half + i) = std::cos(scaled * freq);
    }
    return emb;
}

struct ScoreConfig {
    int num_layers = 4;    // message-passing rounds
    int walk_length = 4;   // r
    int node_dim = 32;
    int edge_dim = 32;
    int max_degree = 10;   // degree one-hot clamp
    bool attention = false;
    int num_heads = 8;
};

// Estimates the score of the adjacency diffusion: walk-feature encoder phi,
// num_layers rounds of node AGG/COM plus edge combine, sinusoidal time
// conditioning, and a 2-hidden-layer head mapping edge features to a scalar.
struct ScoreNetwork {
    ScoreConfig cfg;
    Mlp phi;                           // walk_length -> edge_dim -> edge_dim
    std::vector<Linear> node_combine;  // [f, agg] -> node_dim
    std::vector<Linear> edge_combine;  // [e, f_i, f_j] -> edge_dim
    std::vector<Linear> attn_q, attn_k, attn_v;  // attention mode only
    Mlp head;                          // edge_dim -> 32 -> 32 -> 1

    int node_width(int layer) const {
        return layer == 0 ? cfg.edge_dim + cfg.max_degree + 1 : cfg.node_dim;
    }
    int agg_width(int layer) const { return cfg.attention ? cfg.node_dim : node_width(layer); }

    ParamRefs params() {
        ParamRefs out;
        phi.collect(out);
        for (auto& l : node_combine) l.collect(out);
        for (auto& l : edge_combine) l.collect(out);
        for (auto& l : attn_q) l.collect(out);
        for (auto& l : attn_k) l.collect(out);
        for (auto& l : attn_v) l.collect(out);
        head.collect(out);
        return out;
    }
};

inline ScoreNetwork make_score_network(const ScoreConfig& cfg, std::uint64_t seed) {
    if (cfg.num_layers < 1 || cfg.walk_length < 1 || cfg.node_dim < 1 || cfg.edge_dim < 1)
        throw ArgumentError("score network dimensions must be positive");
    if (cfg.attention && cfg.node_dim % cfg.num_heads != 0)
        throw ArgumentError("node_dim must be divisible by num_heads");
    ScoreNetwork net;
    net.cfg = cfg;
    RngStream rng(seed);
    net.phi = Mlp({cfg.walk_length, cfg.edge_dim, cfg.edge_dim}, false, rng);
    for (int k = 0; k < cfg.num_layers; ++k) {
        net.node_combine.emplace_back(net.node_width(k) + net.agg_width(k), cfg.node_dim, rng);
        net.edge_combine.emplace_back(cfg.edge_dim + 2 * net.node_width(k), cfg.edge_dim, rng);
        if (cfg.attention) {
            net.attn_q.emplace_back(net.node_width(k), cfg.node_dim, rng);
            net.attn_k.emplace_back(net.node_width(k), cfg.node_dim, rng);
            net.attn_v.emplace_back(net.node_width(k), cfg.node_dim, rng);
        }
    }
    net.head = Mlp({cfg.edge_dim, 32, 32, 1}, false, rng);
    return net;
}

inline bool score_params_finite(ScoreNetwork& net) {
    for (const Param* p : net.params())
        if (!p->value.allFinite()) return false;
    return true;
}

struct ScoreTrace {
    int n = 0;
    double t = 0.0;
    Eigen::MatrixXd a_dot;
    Mlp::Trace phi_trace;
    std::vector<Eigen::MatrixXd> f;         // node states, f[0] .. f[num_layers]
    std::vector<Eigen::MatrixXd> e;         // edge states, e[0] .. e[num_layers]
    std::vector<Eigen::MatrixXd> node_cat;  // [f, agg] per layer
    std::vector<Eigen::MatrixXd> edge_cat;  // [e, f_i, f_j] per layer
    std::vector<Eigen::MatrixXd> q, k, v;   // attention projections per layer
    std::vector<std::vector<Eigen::MatrixXd>> alpha;  // [layer][head] attention weights
    Mlp::Trace head_trace;
    Eigen::MatrixXd output;
};

inline ScoreTrace score_forward_trace(const Eigen::MatrixXd& a_t, double t,
                                      const ScoreNetwork& net) {
    if (a_t.rows() != a_t.cols()) throw ShapeError("score input must be square");
    const auto& cfg = net.cfg;
    const int n = static_cast<int>(a_t.rows());
    ScoreTrace tr;
    tr.n = n;
    tr.t = t;
    tr.a_dot = threshold_adjacency(a_t);
    // the loop below holds references into these while appending
    tr.f.reserve(cfg.num_layers + 1);
    tr.e.reserve(cfg.num_layers + 1);

    tr.phi_trace = net.phi.forward_trace(random_walk_features(a_t, cfg.walk_length));
    const Eigen::MatrixXd& e0 = tr.phi_trace.output;  // n^2 x edge_dim

    // f_i^(0) = [e_ii, degree one-hot]
    Eigen::MatrixXd f0 = Eigen::MatrixXd::Zero(n, net.node_width(0));
    for (int i = 0; i < n; ++i) {
        f0.row(i).head(cfg.edge_dim) = e0.row(i * n + i);
        const int deg = std::min(static_cast<int>(std::lround(tr.a_dot.row(i).sum())), cfg.max_degree);
        f0(i, cfg.edge_dim + deg) = 1.0;
    }
    tr.f.push_back(std::move(f0));
    tr.e.push_back(e0);

    const int head_dim = cfg.attention ? cfg.node_dim / cfg.num_heads : 0;
    for (int k = 0; k < cfg.num_layers; ++k) {
        const Eigen::MatrixXd& fk = tr.f[k];
        const Eigen::MatrixXd& ek = tr.e[k];

        Eigen::MatrixXd agg;
        if (cfg.attention) {
            const Eigen::MatrixXd qv = net.attn_q[k].forward(fk);
            const Eigen::MatrixXd kv = net.attn_k[k].forward(fk);
            const Eigen::MatrixXd vv = net.attn_v[k].forward(fk);
            const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
            agg = Eigen::MatrixXd::Zero(n, cfg.node_dim);
            std::vector<Eigen::MatrixXd> alphas;
            for (int h = 0; h < cfg.num_heads; ++h) {
                const auto qh = qv.middleCols(h * head_dim, head_dim);
                const auto kh = kv.middleCols(h * head_dim, head_dim);
                const Eigen::MatrixXd scores = (qh * kh.transpose()) * scale;
                Eigen::MatrixXd al = Eigen::MatrixXd::Zero(n, n);
                for (int i = 0; i < n; ++i) {
                    double mx = -std::numeric_limits<double>::infinity();
                    for (int j = 0; j < n; ++j)
                        if (tr.a_dot(i, j) > 0.0) mx = std::max(mx, scores(i, j));
                    if (!std::isfinite(mx)) continue;  // isolated node: zero aggregation
                    double sum = 0.0;
                    for (int j = 0; j < n; ++j)
                        if (tr.a_dot(i, j) > 0.0) {
                            al(i, j) = std::exp(scores(i, j) - mx);
                            sum += al(i, j);
                        }
                    al.row(i) /= sum;
                }
                agg.middleCols(h * head_dim, head_dim) = al * vv.middleCols(h * head_dim, head_dim);
                alphas.push_back(std::move(al));
            }
            tr.q.push_back(qv);
            tr.k.push_back(kv);
            tr.v.push_back(vv);
            tr.alpha.push_back(std::move(alphas));
        } else {
            agg = tr.a_dot * fk;
        }

        Eigen::MatrixXd cat(n, fk.cols() + agg.cols());
        cat << fk, agg;
        tr.f.push_back(relu(net.node_combine[k].forward(cat)));
        tr.node_cat.push_back(std::move(cat));

        const Eigen::Index fw = fk.cols();
        Eigen::MatrixXd ecat(n * n, cfg.edge_dim + 2 * fw);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const int p = i * n + j;
                ecat.row(p).head(cfg.edge_dim) = ek.row(p);
                ecat.row(p).segment(cfg.edge_dim, fw) = fk.row(i);
                ecat.row(p).tail(fw) = fk.row(j);
            }
        tr.e.push_back(relu(net.edge_combine[k].forward(ecat)));
        tr.edge_cat.push_back(std::move(ecat));
    }

    const Eigen::VectorXd temb = sinusoidal_time_embedding(t, cfg.edge_dim);
    tr.head_trace = net.head.forward_trace(tr.e.back().rowwise() + temb.transpose());

    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = tr.head_trace.output(i * n + j, 0);
    tr.output = 0.5 * (m + m.transpose());
    tr.output.diagonal().setZero();
    return tr;
}

inline Eigen::MatrixXd score_forward(const Eigen::MatrixXd& a_t, double t,
                                     const ScoreNetwork& net) {
    return score_forward_trace(a_t, t, net).output;
}

// Accumulates parameter gradients given dL/d(output matrix).
inline void score_backward(const ScoreTrace& tr, const Eigen::MatrixXd& d_output,
                           ScoreNetwork& net) {
    const auto& cfg = net.cfg;
    const int n = tr.n;

    // through symmetrization + zero diagonal
    Eigen::MatrixXd dm = 0.5 * (d_output + d_output.transpose());
    dm.diagonal().setZero();
    Eigen::MatrixXd dhead(n * n, 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dhead(i * n + j, 0) = dm(i, j);

    Eigen::MatrixXd de = net.head.backward(tr.head_trace, dhead);  // time embedding is constant
    Eigen::MatrixXd df = Eigen::MatrixXd::Zero(n, tr.f.back().cols());  // final f is unused downstream

    const int head_dim = cfg.attention ? cfg.node_dim / cfg.num_heads : 0;
    for (int k = cfg.num_layers - 1; k >= 0; --k) {
        const Eigen::Index fw = tr.f[k].cols();
        Eigen::MatrixXd df_prev = Eigen::MatrixXd::Zero(n, fw);

        // edge combine: e^{k+1} = relu([e^k, f^k_i, f^k_j] W + b)
        Eigen::MatrixXd decat =
            net.edge_combine[k].backward(tr.edge_cat[k], relu_backward(tr.e[k + 1], de));
        de = decat.leftCols(cfg.edge_dim).eval();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const int p = i * n + j;
                df_prev.row(i) += decat.row(p).segment(cfg.edge_dim, fw);
                df_prev.row(j) += decat.row(p).tail(fw);
            }

        // node combine: f^{k+1} = relu([f^k, agg^k] W + b)
        Eigen::MatrixXd dcat =
            net.node_combine[k].backward(tr.node_cat[k], relu_backward(tr.f[k + 1], df));
        df_prev += dcat.leftCols(fw);
        const Eigen::MatrixXd dagg = dcat.rightCols(net.agg_width(k));

        if (cfg.attention) {
            Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(n, cfg.node_dim);
            Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(n, cfg.node_dim);
            Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(n, cfg.node_dim);
            const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
            for (int h = 0; h < cfg.num_heads; ++h) {
                const auto qh = tr.q[k].middleCols(h * head_dim, head_dim);
                const auto kh = tr.k[k].middleCols(h * head_dim, head_dim);
                const auto vh = tr.v[k].middleCols(h * head_dim, head_dim);
                const Eigen::MatrixXd& al = tr.alpha[k][h];
                const auto dagg_h = dagg.middleCols(h * head_dim, head_dim);
                dv.middleCols(h * head_dim, head_dim) += al.transpose() * dagg_h;
                const Eigen::MatrixXd dal = dagg_h * vh.transpose();  // n x n
                // softmax rows: ds = al .* (dal - rowsum(al .* dal))
                const Eigen::VectorXd row_dot = (al.array() * dal.array()).rowwise().sum();
                const Eigen::MatrixXd ds =
                    (al.array() * (dal.array().colwise() - row_dot.array())).matrix();
                dq.middleCols(h * head_dim, head_dim) += ds * kh * scale;
                dk.middleCols(h * head_dim, head_dim) += ds.transpose() * qh * scale;
            }
            df_prev += net.attn_q[k].backward(tr.f[k], dq);
            df_prev += net.attn_k[k].backward(tr.f[k], dk);
            df_prev += net.attn_v[k].backward(tr.f[k], dv);
        } else {
            df_prev += tr.a_dot.transpose() * dagg;
        }
        df = std::move(df_prev);
    }

    // f^0 rows feed back into e^0 at the self pairs; degree one-hot is constant
    Eigen::MatrixXd de0 = de;
    for (int i = 0; i < n; ++i) de0.row(i * n + i) += df.row(i).head(cfg.edge_dim);
    net.phi.backward(tr.phi_trace, de0);
}

}  // namespace gala
