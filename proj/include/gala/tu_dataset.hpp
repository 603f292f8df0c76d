#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gala/graph.hpp"

namespace gala {

namespace detail {

inline std::vector<std::string> read_lines(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw FormatError("missing or unreadable file: " + file.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        // trailing blank lines are common in distributed TU files
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        lines.push_back(line);
    }
    return lines;
}

inline std::vector<double> parse_csv_row(const std::string& line, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw FormatError("bad numeric value in " + what + ": '" + tok + "'");
        }
    }
    if (out.empty()) throw FormatError("empty row in " + what);
    return out;
}

inline long parse_int(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        long v = std::stol(s, &pos);
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError("bad integer in " + what + ": '" + s + "'");
    }
}

// TU files name every part <prefix>_<part>.txt with <prefix> usually the directory name.
inline std::string find_tu_prefix(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
    const std::string base = dir.filename().string();
    if (std::filesystem::exists(dir / (base + "_A.txt"))) return base;
    std::vector<std::string> candidates;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        const std::string suffix = "_A.txt";
        if (name.size() > suffix.size() && name.ends_with(suffix))
            candidates.push_back(name.substr(0, name.size() - suffix.size()));
    }
    if (candidates.size() != 1)
        throw FormatError("cannot infer dataset prefix in " + dir.string());
    return candidates[0];
}

}  // namespace detail

// Reads a dataset in TUDataset layout: <prefix>_A.txt (1-indexed comma-separated
// edge pairs), <prefix>_graph_indicator.txt, <prefix>_graph_labels.txt, and at
// least one of <prefix>_node_labels.txt / <prefix>_node_attributes.txt.
// Node labels become one-hot attribute rows (concatenated before continuous
// attributes when both exist); graph labels are remapped to contiguous [0, C).
inline Dataset parse_tu_dataset(const std::filesystem::path& directory) {
    namespace fs = std::filesystem;
    const std::string prefix = detail::find_tu_prefix(directory);
    const auto file = [&](const std::string& part) { return directory / (prefix + "_" + part + ".txt"); };

    const auto indicator_lines = detail::read_lines(file("graph_indicator"));
    const auto edge_lines = detail::read_lines(file("A"));
    const auto label_lines = detail::read_lines(file("graph_labels"));

    const int total_nodes = static_cast<int>(indicator_lines.size());
    const int num_graphs = static_cast<int>(label_lines.size());
    if (num_graphs == 0) throw FormatError("graph_labels file is empty");

    // indicator: 1-indexed graph id per node, non-decreasing and covering 1..N
    std::vector<int> graph_of(total_nodes);
    std::vector<int> first_node(num_graphs, -1);
    std::vector<int> node_count(num_graphs, 0);
    int prev = 0;
    for (int i = 0; i < total_nodes; ++i) {
        const long gid = detail::parse_int(indicator_lines[i], "graph_indicator");
        if (gid < prev || gid > prev + 1 || gid < 1 || gid > num_graphs)
            throw IntegrityError("non-contiguous graph indicator at node " + std::to_string(i + 1));
        prev = static_cast<int>(gid);
        graph_of[i] = static_cast<int>(gid) - 1;
        if (first_node[gid - 1] < 0) first_node[gid - 1] = i;
        ++node_count[gid - 1];
    }
    if (prev != num_graphs) throw IntegrityError("graph indicator does not cover all graphs");

    // graph labels remapped to contiguous [0, C)
    std::vector<long> raw_labels(num_graphs);
    std::vector<long> uniq;
    for (int g = 0; g < num_graphs; ++g) {
        raw_labels[g] = detail::parse_int(label_lines[g], "graph_labels");
        uniq.push_back(raw_labels[g]);
    }
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::map<long, int> label_map;
    for (size_t i = 0; i < uniq.size(); ++i) label_map[uniq[i]] = static_cast<int>(i);

    // node features
    const bool has_node_labels = fs::exists(file("node_labels"));
    const bool has_node_attrs = fs::exists(file("node_attributes"));
    if (!has_node_labels && !has_node_attrs)
        throw FormatError("dataset must provide node_labels or node_attributes");

    std::vector<int> node_label_onehot_idx;
    int onehot_width = 0;
    if (has_node_labels) {
        const auto lines = detail::read_lines(file("node_labels"));
        if (static_cast<int>(lines.size()) != total_nodes)
            throw FormatError("node_labels row count does not match graph_indicator");
        std::vector<long> raw(total_nodes);
        std::vector<long> u;
        for (int i = 0; i < total_nodes; ++i) {
            raw[i] = detail::parse_int(lines[i], "node_labels");
            u.push_back(raw[i]);
        }
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
        std::map<long, int> m;
        for (size_t i = 0; i < u.size(); ++i) m[u[i]] = static_cast<int>(i);
        onehot_width = static_cast<int>(u.size());
        node_label_onehot_idx.resize(total_nodes);
        for (int i = 0; i < total_nodes; ++i) node_label_onehot_idx[i] = m[raw[i]];
    }

    std::vector<std::vector<double>> cont_attrs;
    int cont_width = 0;
    if (has_node_attrs) {
        const auto lines = detail::read_lines(file("node_attributes"));
        if (static_cast<int>(lines.size()) != total_nodes)
            throw FormatError("node_attributes row count does not match graph_indicator");
        cont_attrs.reserve(total_nodes);
        for (const auto& line : lines) cont_attrs.push_back(detail::parse_csv_row(line, "node_attributes"));
        cont_width = static_cast<int>(cont_attrs[0].size());
        for (const auto& row : cont_attrs)
            if (static_cast<int>(row.size()) != cont_width)
                throw FormatError("ragged node_attributes rows");
    }
    const int attr_dim = onehot_width + cont_width;

    // edges, 1-indexed global node ids; reversed/duplicate pairs collapse, self-loops dropped
    std::vector<std::vector<Edge>> edges_per_graph(num_graphs);
    for (const auto& line : edge_lines) {
        const auto pair = detail::parse_csv_row(line, "A");
        if (pair.size() != 2) throw FormatError("edge rows must have two entries");
        const long a = static_cast<long>(pair[0]), b = static_cast<long>(pair[1]);
        if (a < 1 || a > total_nodes || b < 1 || b > total_nodes)
            throw IntegrityError("edge endpoint outside node range");
        const int ga = graph_of[a - 1], gb = graph_of[b - 1];
        if (ga != gb)
            throw IntegrityError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                                 ") connects different graphs");
        if (a == b) continue;
        edges_per_graph[ga].emplace_back(static_cast<int>(a - 1) - first_node[ga],
                                         static_cast<int>(b - 1) - first_node[ga]);
    }

    Dataset out;
    out.num_classes = static_cast<int>(uniq.size());
    out.attribute_dim = attr_dim;
    out.graphs.reserve(num_graphs);
    for (int g = 0; g < num_graphs; ++g) {
        const int n = node_count[g];
        Eigen::MatrixXd attrs = Eigen::MatrixXd::Zero(n, attr_dim);
        for (int i = 0; i < n; ++i) {
            const int global = first_node[g] + i;
            if (has_node_labels) attrs(i, node_label_onehot_idx[global]) = 1.0;
            for (int k = 0; k < cont_width; ++k) attrs(i, onehot_width + k) = cont_attrs[global][k];
        }
        out.graphs.push_back(make_graph(n, std::move(edges_per_graph[g]), std::move(attrs),
                                        label_map.at(raw_labels[g])));
    }
    return out;
}

// Writes a dataset in the same layout (node features go to node_attributes with
// full precision so parse -> write -> parse round-trips exactly).
inline void write_tu_dataset(const Dataset& d, const std::filesystem::path& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    const std::string prefix = directory.filename().string();
    const auto open = [&](const std::string& part) {
        std::ofstream out(directory / (prefix + "_" + part + ".txt"));
        if (!out) throw IoError("cannot write " + (directory / (prefix + "_" + part + ".txt")).string());
        return out;
    };

    auto a = open("A");
    auto ind = open("graph_indicator");
    auto glab = open("graph_labels");
    auto nattr = open("node_attributes");
    char buf[64];
    int base = 0;
    for (size_t g = 0; g < d.graphs.size(); ++g) {
        const Graph& gr = d.graphs[g];
        for (const auto& [i, j] : gr.edges) {
            a << (base + i + 1) << ", " << (base + j + 1) << "\n";
            a << (base + j + 1) << ", " << (base + i + 1) << "\n";
        }
        for (int i = 0; i < gr.node_count; ++i) {
            ind << (g + 1) << "\n";
            for (int k = 0; k < gr.node_attributes.cols(); ++k) {
                std::snprintf(buf, sizeof(buf), "%.17g", gr.node_attributes(i, k));
                nattr << (k ? ", " : "") << buf;
            }
            nattr << "\n";
        }
        glab << (gr.label ? *gr.label : 0) << "\n";
        base += gr.node_count;
    }
}

}  // namespace gala
