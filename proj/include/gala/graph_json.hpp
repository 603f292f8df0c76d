#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "gala/graph.hpp"

namespace gala {

using json = nlohmann::json;

// Canonical graph object: {"n": int, "edges": [[i,j],...], "x": [[...]], "y": int|null},
// edge pairs with i < j. Used by all report/debug dumps.
inline json graph_to_json(const Graph& g) {
    json edges = json::array();
    for (const auto& [a, b] : g.edges) edges.push_back({a, b});
    json x = json::array();
    for (int i = 0; i < g.node_count; ++i) {
        json row = json::array();
        for (int j = 0; j < g.node_attributes.cols(); ++j) row.push_back(g.node_attributes(i, j));
        x.push_back(std::move(row));
    }
    json out{{"n", g.node_count}, {"edges", std::move(edges)}, {"x", std::move(x)}};
    if (g.label)
        out["y"] = *g.label;
    else
        out["y"] = nullptr;
    return out;
}

inline Graph graph_from_json(const json& j) {
    if (!j.contains("n") || !j.contains("edges") || !j.contains("x"))
        throw FormatError("graph object must contain n, edges, x");
    const int n = j.at("n").get<int>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2) throw FormatError("edge must be a pair");
        edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    const auto& x = j.at("x");
    if (static_cast<int>(x.size()) != n) throw FormatError("x row count must equal n");
    const int d = x.empty() ? 0 : static_cast<int>(x[0].size());
    Eigen::MatrixXd attrs(n, d);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(x[i].size()) != d) throw FormatError("ragged attribute rows");
        for (int k = 0; k < d; ++k) attrs(i, k) = x[i][k].get<double>();
    }
    std::optional<int> label;
    if (j.contains("y") && !j.at("y").is_null()) label = j.at("y").get<int>();
    return make_graph(n, std::move(edges), std::move(attrs), label);
}

inline json dataset_to_json(const Dataset& d) {
    json graphs = json::array();
    for (const auto& g : d.graphs) graphs.push_back(graph_to_json(g));
    return json{{"num_classes", d.num_classes},
                {"attribute_dim", d.attribute_dim},
                {"graphs", std::move(graphs)}};
}

inline Dataset dataset_from_json(const json& j) {
    Dataset d;
    d.num_classes = j.at("num_classes").get<int>();
    d.attribute_dim = j.at("attribute_dim").get<int>();
    for (const auto& gj : j.at("graphs")) d.graphs.push_back(graph_from_json(gj));
    validate_dataset(d);
    return d;
}

}  // namespace gala
