#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

#include "gala/error.hpp"

namespace gala {

using Edge = std::pair<int, int>;

// Undirected attributed graph. Edges are stored once with first < second,
// sorted, no duplicates, no self-loops. Immutable by convention after construction.
struct Graph {
    int node_count = 0;
    std::vector<Edge> edges;
    Eigen::MatrixXd node_attributes;  // node_count x d_f
    std::optional<int> label;

    int attribute_dim() const { return static_cast<int>(node_attributes.cols()); }
    int edge_count() const { return static_cast<int>(edges.size()); }
};

// Normalizes (orients i<j, sorts, collapses duplicates) and validates.
inline Graph make_graph(int node_count, std::vector<Edge> edges, Eigen::MatrixXd node_attributes,
                        std::optional<int> label = std::nullopt) {
    if (node_count <= 0) throw IntegrityError("graph must have at least one node");
    if (node_attributes.rows() != node_count)
        throw IntegrityError("node_attributes row count must equal node_count");
    for (auto& [a, b] : edges) {
        if (a < 0 || a >= node_count || b < 0 || b >= node_count)
            throw IntegrityError("edge endpoint out of range");
        if (a == b) throw IntegrityError("self-loop is not allowed");
        if (a > b) std::swap(a, b);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return Graph{node_count, std::move(edges), std::move(node_attributes), label};
}

inline void validate_graph(const Graph& g) {
    if (g.node_count <= 0) throw IntegrityError("graph must have at least one node");
    if (g.node_attributes.rows() != g.node_count)
        throw IntegrityError("node_attributes row count must equal node_count");
    Edge prev{-1, -1};
    for (const auto& e : g.edges) {
        if (e.first < 0 || e.second >= g.node_count || e.first >= e.second)
            throw IntegrityError("edge list is not canonical");
        if (e <= prev) throw IntegrityError("edge list is not sorted/unique");
        prev = e;
    }
}

// Ordered collection of graphs sharing an attribute space and label space.
struct Dataset {
    std::vector<Graph> graphs;
    int num_classes = 0;
    int attribute_dim = 0;

    int size() const { return static_cast<int>(graphs.size()); }
};

inline void validate_dataset(const Dataset& d) {
    if (d.num_classes <= 0) throw IntegrityError("num_classes must be positive");
    for (const auto& g : d.graphs) {
        validate_graph(g);
        if (g.attribute_dim() != d.attribute_dim)
            throw IntegrityError("graph attribute_dim differs from dataset attribute_dim");
        if (g.label && (*g.label < 0 || *g.label >= d.num_classes))
            throw IntegrityError("graph label out of range");
    }
}

// 2|E| / (|V| (|V|-1)).
inline double graph_density(const Graph& g) {
    if (g.node_count < 2) throw ArgumentError("graph_density requires at least 2 nodes");
    return 2.0 * static_cast<double>(g.edges.size()) /
           (static_cast<double>(g.node_count) * (g.node_count - 1));
}

inline std::vector<int> node_degrees(const Graph& g) {
    std::vector<int> deg(g.node_count, 0);
    for (const auto& [a, b] : g.edges) {
        ++deg[a];
        ++deg[b];
    }
    return deg;
}

// Dense symmetric {0,1} adjacency with zero diagonal.
inline Eigen::MatrixXd adjacency_matrix(const Graph& g) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(g.node_count, g.node_count);
    for (const auto& [a, b] : g.edges) {
        m(a, b) = 1.0;
        m(b, a) = 1.0;
    }
    return m;
}

// Row i is one-hot at min(degree(i), max_degree); width max_degree+1.
inline Eigen::MatrixXd degree_onehot(const Graph& g, int max_degree = 10) {
    if (max_degree <= 0) throw ArgumentError("max_degree must be positive");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(g.node_count, max_degree + 1);
    const auto deg = node_degrees(g);
    for (int i = 0; i < g.node_count; ++i) m(i, std::min(deg[i], max_degree)) = 1.0;
    return m;
}

}  // namespace gala
