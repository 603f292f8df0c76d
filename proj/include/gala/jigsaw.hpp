#pragma once

#include <deque>
#include <map>
#include <numeric>
#include <vector>

#include "gala/classifier.hpp"
#include "gala/graph.hpp"
#include "gala/graph_json.hpp"
#include "gala/rng.hpp"

namespace gala {

struct Partition {
    std::vector<int> community_of;
    int num_communities = 0;
};

inline void validate_partition(const Graph& g, const Partition& p) {
    if (static_cast<int>(p.community_of.size()) != g.node_count)
        throw ContractError("partition size does not match node count");
    std::vector<bool> seen(p.num_communities, false);
    for (int c : p.community_of) {
        if (c < 0 || c >= p.num_communities) throw ContractError("community id out of range");
        seen[c] = true;
    }
    for (bool s : seen)
        if (!s) throw ContractError("community ids must be contiguous from 0");
}

// Newman modularity Q = sum_c [ e_c/m - (deg_c/2m)^2 ]; empty graph -> 0.
inline double modularity(const Graph& g, const Partition& p) {
    validate_partition(g, p);
    const double m = static_cast<double>(g.edge_count());
    if (m == 0.0) return 0.0;
    std::vector<double> intra(p.num_communities, 0.0), deg(p.num_communities, 0.0);
    for (const auto& [i, j] : g.edges) {
        if (p.community_of[i] == p.community_of[j]) intra[p.community_of[i]] += 1.0;
        deg[p.community_of[i]] += 1.0;
        deg[p.community_of[j]] += 1.0;
    }
    double q = 0.0;
    for (int c = 0; c < p.num_communities; ++c)
        q += intra[c] / m - (deg[c] / (2.0 * m)) * (deg[c] / (2.0 * m));
    return q;
}

namespace detail {

// Weighted multigraph in adjacency-matrix convention: self_weight[i] plays the
// role of A_ii, so a collapsed intra-community edge contributes 2 to it.
struct WeightedGraph {
    int n = 0;
    std::vector<std::vector<std::pair<int, double>>> adj;  // neighbors j != i
    std::vector<double> self_weight;
};

// One Louvain local-moving phase; returns whether any node moved.
inline bool louvain_local_move(const WeightedGraph& wg, std::vector<int>& comm, RngStream& rng) {
    std::vector<double> strength(wg.n, 0.0);
    for (int i = 0; i < wg.n; ++i) {
        strength[i] = wg.self_weight[i];
        for (const auto& [j, w] : wg.adj[i]) strength[i] += w;
    }
    const double m2 = std::accumulate(strength.begin(), strength.end(), 0.0);
    if (m2 <= 0.0) return false;

    std::vector<double> comm_tot(wg.n, 0.0);
    for (int i = 0; i < wg.n; ++i) comm_tot[comm[i]] += strength[i];

    std::vector<int> order(wg.n);
    std::iota(order.begin(), order.end(), 0);

    bool any_move = false;
    bool pass_moved = true;
    std::map<int, double> w_to;
    while (pass_moved) {
        pass_moved = false;
        rng.shuffle(order);
        for (int i : order) {
            const int c_old = comm[i];
            w_to.clear();
            w_to[c_old] = 0.0;  // staying is always a candidate
            for (const auto& [j, w] : wg.adj[i]) w_to[comm[j]] += w;
            comm_tot[c_old] -= strength[i];

            // dQ of joining c from isolation: (2/m2) (w_to_c - k_i tot_c / m2)
            int best_c = c_old;
            double best_gain = (2.0 / m2) * (w_to[c_old] - strength[i] * comm_tot[c_old] / m2);
            for (const auto& [c, w] : w_to) {
                const double gain = (2.0 / m2) * (w - strength[i] * comm_tot[c] / m2);
                if (gain > best_gain + 1e-9) {
                    best_gain = gain;
                    best_c = c;
                }
            }
            comm_tot[best_c] += strength[i];
            comm[i] = best_c;
            if (best_c != c_old) {
                pass_moved = true;
                any_move = true;
            }
        }
    }
    return any_move;
}

inline void relabel_contiguous(std::vector<int>& comm, int& num_communities) {
    std::map<int, int> remap;
    for (int& c : comm) {
        auto [it, inserted] = remap.try_emplace(c, static_cast<int>(remap.size()));
        c = it->second;
    }
    num_communities = static_cast<int>(remap.size());
}

inline WeightedGraph louvain_aggregate(const WeightedGraph& wg, const std::vector<int>& comm,
                                       int num_communities) {
    WeightedGraph out;
    out.n = num_communities;
    out.adj.resize(num_communities);
    out.self_weight.assign(num_communities, 0.0);
    std::vector<std::map<int, double>> cross(num_communities);
    for (int i = 0; i < wg.n; ++i) {
        const int c = comm[i];
        out.self_weight[c] += wg.self_weight[i];
        for (const auto& [j, w] : wg.adj[i]) {
            if (comm[j] == c)
                out.self_weight[c] += w;  // both directions of the pair land here
            else
                cross[c][comm[j]] += w;
        }
    }
    for (int c = 0; c < num_communities; ++c)
        for (const auto& [d, w] : cross[c]) out.adj[c].emplace_back(d, w);
    return out;
}

}  // namespace detail

// Greedy modularity optimization: local moving + aggregation until no move
// gains more than 1e-9; node visit order is shuffled by the seed.
inline Partition louvain_communities(const Graph& g, std::uint64_t seed) {
    if (g.node_count < 1) throw ArgumentError("community detection needs at least one node");
    detail::WeightedGraph wg;
    wg.n = g.node_count;
    wg.adj.resize(wg.n);
    wg.self_weight.assign(wg.n, 0.0);
    for (const auto& [i, j] : g.edges) {
        wg.adj[i].emplace_back(j, 1.0);
        wg.adj[j].emplace_back(i, 1.0);
    }

    RngStream rng(seed);
    std::vector<int> node_comm(g.node_count);  // community of each original node
    std::iota(node_comm.begin(), node_comm.end(), 0);

    std::vector<int> comm = node_comm;  // community of each current super-node
    while (true) {
        if (!detail::louvain_local_move(wg, comm, rng)) break;
        int k = 0;
        detail::relabel_contiguous(comm, k);
        for (int& c : node_comm) c = comm[c];
        wg = detail::louvain_aggregate(wg, comm, k);
        comm.resize(k);
        std::iota(comm.begin(), comm.end(), 0);
    }

    Partition p;
    p.community_of = node_comm;
    detail::relabel_contiguous(p.community_of, p.num_communities);
    return p;
}

struct GraphSplit {
    Graph complement;                   // induced on the kept nodes
    Graph subgraph;                     // induced on the removed community
    std::vector<Edge> cut;              // (complement-local, subgraph-local) endpoints
    std::vector<int> complement_nodes;  // original ids, ascending
    std::vector<int> subgraph_nodes;
};

namespace detail {

inline Graph induce(const Graph& g, const std::vector<int>& nodes, const std::vector<int>& local) {
    std::vector<Edge> edges;
    for (const auto& [i, j] : g.edges)
        if (local[i] >= 0 && local[j] >= 0) edges.emplace_back(local[i], local[j]);
    Eigen::MatrixXd attrs(nodes.size(), g.node_attributes.cols());
    for (size_t k = 0; k < nodes.size(); ++k) attrs.row(k) = g.node_attributes.row(nodes[k]);
    return make_graph(static_cast<int>(nodes.size()), std::move(edges), std::move(attrs),
                      std::nullopt);
}

// Random-start BFS subset of the requested size (jumps to a fresh random node
// if a component is exhausted first).
inline std::vector<bool> bfs_subset(const Graph& g, int target, RngStream& rng) {
    std::vector<std::vector<int>> adj(g.node_count);
    for (const auto& [i, j] : g.edges) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    std::vector<bool> in(g.node_count, false);
    std::deque<int> frontier;
    int taken = 0;
    while (taken < target) {
        if (frontier.empty()) {
            std::vector<int> rest;
            for (int v = 0; v < g.node_count; ++v)
                if (!in[v]) rest.push_back(v);
            const int start = rest[rng.uniform_int(static_cast<int>(rest.size()))];
            in[start] = true;
            ++taken;
            frontier.push_back(start);
            continue;
        }
        const int v = frontier.front();
        frontier.pop_front();
        for (int u : adj[v]) {
            if (taken >= target) break;
            if (!in[u]) {
                in[u] = true;
                ++taken;
                frontier.push_back(u);
            }
        }
    }
    return in;
}

}  // namespace detail

// Remove one uniformly chosen community (or a BFS-grown quarter of the graph
// when the partition is trivial) and return both induced halves plus the cut.
inline GraphSplit split_graph(const Graph& g, const Partition& p, RngStream& rng) {
    validate_partition(g, p);
    std::vector<bool> removed(g.node_count, false);
    if (p.num_communities > 1) {
        const int pick = rng.uniform_int(p.num_communities);
        for (int v = 0; v < g.node_count; ++v) removed[v] = (p.community_of[v] == pick);
    } else {
        removed = detail::bfs_subset(g, (g.node_count + 3) / 4, rng);
    }

    GraphSplit out;
    std::vector<int> comp_local(g.node_count, -1), sub_local(g.node_count, -1);
    for (int v = 0; v < g.node_count; ++v) {
        if (removed[v]) {
            sub_local[v] = static_cast<int>(out.subgraph_nodes.size());
            out.subgraph_nodes.push_back(v);
        } else {
            comp_local[v] = static_cast<int>(out.complement_nodes.size());
            out.complement_nodes.push_back(v);
        }
    }
    out.complement = detail::induce(g, out.complement_nodes, comp_local);
    out.subgraph = detail::induce(g, out.subgraph_nodes, sub_local);
    for (const auto& [i, j] : g.edges) {
        if (!removed[i] && removed[j]) out.cut.emplace_back(comp_local[i], sub_local[j]);
        if (removed[i] && !removed[j]) out.cut.emplace_back(comp_local[j], sub_local[i]);
    }
    return out;
}

struct JigsawResult {
    Graph augmented_confident;
    Graph augmented_unconfident;
    Graph removed_from_confident;
    Graph removed_from_unconfident;
    std::vector<int> sigma_confident;    // removed-local -> incoming-local
    std::vector<int> sigma_unconfident;
    int cut_confident = 0;
    int cut_unconfident = 0;
};

namespace detail {

// sigma: removed-subgraph node -> incoming-subgraph node. Injective when the
// incoming side is at least as large, otherwise i.i.d. uniform.
inline std::vector<int> rewiring_map(int removed_size, int incoming_size, RngStream& rng) {
    std::vector<int> sigma(removed_size);
    if (incoming_size >= removed_size) {
        std::vector<int> pool(incoming_size);
        std::iota(pool.begin(), pool.end(), 0);
        rng.shuffle(pool);
        for (int i = 0; i < removed_size; ++i) sigma[i] = pool[i];
    } else {
        for (int i = 0; i < removed_size; ++i) sigma[i] = rng.uniform_int(incoming_size);
    }
    return sigma;
}

inline Graph stitch(const GraphSplit& host, const Graph& incoming, const std::vector<int>& sigma) {
    const int n_keep = host.complement.node_count;
    const int n = n_keep + incoming.node_count;
    std::vector<Edge> edges = host.complement.edges;
    for (const auto& [i, j] : incoming.edges) edges.emplace_back(n_keep + i, n_keep + j);
    for (const auto& [comp_end, sub_end] : host.cut)
        edges.emplace_back(comp_end, n_keep + sigma[sub_end]);
    Eigen::MatrixXd attrs(n, host.complement.node_attributes.cols());
    attrs.topRows(n_keep) = host.complement.node_attributes;
    attrs.bottomRows(incoming.node_count) = incoming.node_attributes;
    return make_graph(n, std::move(edges), std::move(attrs), std::nullopt);
}

}  // namespace detail

// Swap a random community between the two hosts; cut edges reattach through a
// random node map, attributes travel with their nodes, outputs are unlabeled.
inline JigsawResult jigsaw_exchange(const Graph& confident, const Graph& unconfident,
                                    RngStream& rng) {
    if (confident.node_count < 1 || unconfident.node_count < 1)
        throw ArgumentError("jigsaw needs nonempty graphs");
    if (confident.attribute_dim() != unconfident.attribute_dim())
        throw ContractError("jigsaw hosts must share an attribute width");

    const Partition pc = louvain_communities(confident, rng.engine()());
    const Partition pu = louvain_communities(unconfident, rng.engine()());
    const GraphSplit sc = split_graph(confident, pc, rng);
    const GraphSplit su = split_graph(unconfident, pu, rng);

    JigsawResult out;
    out.sigma_confident =
        detail::rewiring_map(sc.subgraph.node_count, su.subgraph.node_count, rng);
    out.sigma_unconfident =
        detail::rewiring_map(su.subgraph.node_count, sc.subgraph.node_count, rng);
    out.augmented_confident = detail::stitch(sc, su.subgraph, out.sigma_confident);
    out.augmented_unconfident = detail::stitch(su, sc.subgraph, out.sigma_unconfident);
    out.removed_from_confident = sc.subgraph;
    out.removed_from_unconfident = su.subgraph;
    out.cut_confident = static_cast<int>(sc.cut.size());
    out.cut_unconfident = static_cast<int>(su.cut.size());
    return out;
}

// KL(p_tilde || p_fixed) with p_fixed treated as a constant teacher.
inline double kl_divergence(const Eigen::VectorXd& p_tilde, const Eigen::VectorXd& p_fixed) {
    double kl = 0.0;
    for (Eigen::Index k = 0; k < p_tilde.size(); ++k)
        if (p_tilde(k) > 0.0)
            kl += p_tilde(k) * (std::log(p_tilde(k)) - std::log(std::max(p_fixed(k), 1e-300)));
    return kl;
}

// dKL/dlogits for p_tilde = softmax(logits): p .* (g - (g . p)) with
// g = ln p_tilde - ln p_fixed + 1.
inline Eigen::VectorXd kl_dlogits(const Eigen::VectorXd& p_tilde, const Eigen::VectorXd& p_fixed) {
    Eigen::VectorXd g(p_tilde.size());
    for (Eigen::Index k = 0; k < p_tilde.size(); ++k)
        g(k) = std::log(std::max(p_tilde(k), 1e-300)) - std::log(std::max(p_fixed(k), 1e-300)) + 1.0;
    const double mix = g.dot(p_tilde);
    return p_tilde.cwiseProduct(g.array().matrix() - Eigen::VectorXd::Constant(p_tilde.size(), mix));
}

struct ConsistencyBatch {
    // (augmented confident graph, pseudo label)
    std::vector<std::pair<const Graph*, int>> confident;
    // (augmented unconfident graph, frozen teacher prediction on the original)
    std::vector<std::pair<const Graph*, Eigen::VectorXd>> unconfident;
};

// Eq-style consistency objective: pseudo-label cross-entropy on augmented
// confident graphs plus KL(augmented || original) on unconfident ones.
// Gradients accumulate into the model; empty sets contribute zero.
inline double consistency_loss(const ConsistencyBatch& batch, ClassifierModel& m) {
    double loss = 0.0;
    if (!batch.confident.empty()) {
        const double inv = 1.0 / static_cast<double>(batch.confident.size());
        for (const auto& [g, label] : batch.confident) {
            const ClassifierTrace t = classifier_forward(*g, m);
            loss += cross_entropy(t.logits, label) * inv;
            classifier_backward(t, Eigen::VectorXd(cross_entropy_dlogits(t.probs, label) * inv), m);
        }
    }
    if (!batch.unconfident.empty()) {
        const double inv = 1.0 / static_cast<double>(batch.unconfident.size());
        for (const auto& [g, teacher] : batch.unconfident) {
            const ClassifierTrace t = classifier_forward(*g, m);
            loss += kl_divergence(t.probs, teacher) * inv;
            classifier_backward(t, Eigen::VectorXd(kl_dlogits(t.probs, teacher) * inv), m);
        }
    }
    return loss;
}

// JSON-lines row describing one exchange, for augmentation inspection.
inline nlohmann::json jigsaw_trace_line(int epoch, int confident_index, int unconfident_index,
                                        const JigsawResult& r) {
    return nlohmann::json{
        {"epoch", epoch},
        {"pair", {confident_index, unconfident_index}},
        {"community_sizes",
         {r.removed_from_confident.node_count, r.removed_from_unconfident.node_count}},
        {"cut_edge_counts", {r.cut_confident, r.cut_unconfident}},
        {"sigma", {{"confident", r.sigma_confident}, {"unconfident", r.sigma_unconfident}}}};
}

}  // namespace gala
