#pragma once

#include <utility>
#include <vector>

#include "gala/config.hpp"
#include "gala/graph.hpp"
#include "gala/rng.hpp"

namespace gala {

struct SyntheticSpec {
    int graphs_per_domain = 200;
    int min_nodes = 12;
    int max_nodes = 24;
    double source_intra = 0.35;
    double source_inter = 0.05;
    double target_intra = 0.7;
    double target_inter = 0.2;
    int max_degree = 10;  // degree one-hot attribute clamp

    static SyntheticSpec from_config(const ExperimentConfig& cfg) {
        SyntheticSpec s;
        s.graphs_per_domain = cfg.synth_graphs;
        s.min_nodes = cfg.synth_min_nodes;
        s.max_nodes = cfg.synth_max_nodes;
        s.source_intra = cfg.synth_source_intra;
        s.source_inter = cfg.synth_source_inter;
        s.target_intra = cfg.synth_target_intra;
        s.target_inter = cfg.synth_target_inter;
        s.max_degree = cfg.synth_max_degree;
        return s;
    }
};

namespace detail {

// class 0: two-block SBM; class 1: one Erdos-Renyi block at the intra rate.
inline Graph synthetic_graph(int label, int n, double intra, double inter, int max_degree,
                             RngStream& rng) {
    std::vector<Edge> edges;
    const int half = n / 2;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const bool same_block = label == 1 || (i < half) == (j < half);
            if (rng.uniform() < (same_block ? intra : inter)) edges.emplace_back(i, j);
        }
    std::vector<int> deg(n, 0);
    for (const auto& [i, j] : edges) {
        ++deg[i];
        ++deg[j];
    }
    Eigen::MatrixXd attrs = Eigen::MatrixXd::Zero(n, max_degree + 1);
    for (int i = 0; i < n; ++i) attrs(i, std::min(deg[i], max_degree)) = 1.0;
    return make_graph(n, std::move(edges), std::move(attrs), label);
}

inline Dataset synthetic_domain(const SyntheticSpec& spec, double intra, double inter,
                                std::uint64_t seed) {
    Dataset d;
    d.num_classes = 2;
    d.attribute_dim = spec.max_degree + 1;
    d.graphs.reserve(spec.graphs_per_domain);
    for (int g = 0; g < spec.graphs_per_domain; ++g) {
        RngStream rng = RngStream::derive(seed, g);
        const int n = spec.min_nodes + rng.uniform_int(spec.max_nodes - spec.min_nodes + 1);
        d.graphs.push_back(synthetic_graph(g % 2, n, intra, inter, spec.max_degree, rng));
    }
    return d;
}

}  // namespace detail

// Two domains with the same label semantics but shifted edge densities:
// the source is sparse, the target dense. Labels alternate, so counts are
// balanced exactly for even graphs_per_domain.
inline std::pair<Dataset, Dataset> generate_synthetic_benchmark(const SyntheticSpec& spec,
                                                                std::uint64_t seed) {
    if (spec.graphs_per_domain < 2 || spec.min_nodes < 4 || spec.max_nodes < spec.min_nodes)
        throw ArgumentError("synthetic spec out of range");
    Dataset source =
        detail::synthetic_domain(spec, spec.source_intra, spec.source_inter, mix_seed(seed, 0xA1));
    Dataset target =
        detail::synthetic_domain(spec, spec.target_intra, spec.target_inter, mix_seed(seed, 0xA2));
    return {std::move(source), std::move(target)};
}

inline double mean_density(const Dataset& d) {
    if (d.graphs.empty()) throw ArgumentError("mean density of an empty dataset");
    double s = 0.0;
    for (const Graph& g : d.graphs) s += graph_density(g);
    return s / static_cast<double>(d.graphs.size());
}

}  // namespace gala
