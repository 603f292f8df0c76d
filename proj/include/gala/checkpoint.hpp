#pragma once

#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "gala/classifier.hpp"
#include "gala/error.hpp"
#include "gala/noise_schedule.hpp"
#include "gala/score_network.hpp"

namespace gala {

using NamedParams = std::vector<std::pair<std::string, Param*>>;

namespace detail {

inline void collect_linear(NamedParams& out, const std::string& prefix, Linear& l) {
    out.emplace_back(prefix + ".weight", &l.weight);
    out.emplace_back(prefix + ".bias", &l.bias);
}

inline void collect_mlp(NamedParams& out, const std::string& prefix, Mlp& m) {
    for (size_t i = 0; i < m.layers.size(); ++i)
        collect_linear(out, prefix + "." + std::to_string(i), m.layers[i]);
}

inline nlohmann::json tensor_to_json(const Param& p) {
    std::vector<double> data(p.value.size());
    // row-major on disk regardless of Eigen's in-memory order
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
        for (Eigen::Index c = 0; c < p.value.cols(); ++c)
            data[r * p.value.cols() + c] = p.value(r, c);
    return {{"shape", {p.value.rows(), p.value.cols()}}, {"data", std::move(data)}};
}

inline void tensor_from_json(const nlohmann::json& j, const std::string& name, Param& p) {
    if (!j.contains("shape") || !j.contains("data"))
        throw ModelError("tensor '" + name + "' is missing shape or data");
    const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2) throw ModelError("tensor '" + name + "' shape must be rank 2");
    if (shape[0] != p.value.rows() || shape[1] != p.value.cols())
        throw ModelError("tensor '" + name + "' shape does not match the model");
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != p.value.size())
        throw ModelError("tensor '" + name + "' data length does not match its shape");
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
        for (Eigen::Index c = 0; c < p.value.cols(); ++c)
            p.value(r, c) = data[r * p.value.cols() + c];
}

inline nlohmann::json tensors_to_json(const NamedParams& named) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [name, param] : named) out[name] = tensor_to_json(*param);
    return out;
}

inline void tensors_from_json(const nlohmann::json& j, const NamedParams& named) {
    if (!j.is_object()) throw ModelError("'tensors' must be an object");
    if (j.size() != named.size()) throw ModelError("checkpoint tensor set does not match model");
    for (const auto& [name, param] : named) {
        if (!j.contains(name)) throw ModelError("checkpoint is missing tensor '" + name + "'");
        tensor_from_json(j.at(name), name, *param);
    }
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace detail

inline NamedParams named_params(ClassifierModel& m) {
    NamedParams out;
    for (size_t k = 0; k < m.layers.size(); ++k)
        detail::collect_linear(out, "layer" + std::to_string(k), m.layers[k]);
    detail::collect_mlp(out, "head", m.head);
    return out;
}

inline NamedParams named_params(ScoreNetwork& net) {
    NamedParams out;
    detail::collect_mlp(out, "phi", net.phi);
    for (size_t k = 0; k < net.node_combine.size(); ++k)
        detail::collect_linear(out, "node_combine." + std::to_string(k), net.node_combine[k]);
    for (size_t k = 0; k < net.edge_combine.size(); ++k)
        detail::collect_linear(out, "edge_combine." + std::to_string(k), net.edge_combine[k]);
    for (size_t k = 0; k < net.attn_q.size(); ++k) {
        detail::collect_linear(out, "attn_q." + std::to_string(k), net.attn_q[k]);
        detail::collect_linear(out, "attn_k." + std::to_string(k), net.attn_k[k]);
        detail::collect_linear(out, "attn_v." + std::to_string(k), net.attn_v[k]);
    }
    detail::collect_mlp(out, "head", net.head);
    return out;
}

inline nlohmann::json classifier_to_json(ClassifierModel& m, const std::string& config_hash = "") {
    return {{"kind", "classifier"},
            {"num_layers", m.num_layers},
            {"hidden_dim", m.hidden_dim},
            {"input_dim", m.input_dim},
            {"num_classes", m.num_classes},
            {"pooling", pooling_name(m.pooling)},
            {"config_hash", config_hash},
            {"tensors", detail::tensors_to_json(named_params(m))}};
}

inline ClassifierModel classifier_from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != std::string("classifier"))
        throw ModelError("checkpoint kind is not 'classifier'");
    ClassifierModel m = make_classifier(j.at("input_dim").get<int>(),
                                        j.at("num_classes").get<int>(), /*seed=*/0,
                                        j.at("num_layers").get<int>(),
                                        j.at("hidden_dim").get<int>(),
                                        pooling_from_name(j.at("pooling").get<std::string>()));
    detail::tensors_from_json(j.at("tensors"), named_params(m));
    return m;
}

inline nlohmann::json score_network_to_json(ScoreNetwork& net, const NoiseSchedule& sched,
                                            bool ema_weights,
                                            const std::string& config_hash = "") {
    return {{"kind", "score_network"},
            {"config",
             {{"num_layers", net.cfg.num_layers},
              {"walk_length", net.cfg.walk_length},
              {"node_dim", net.cfg.node_dim},
              {"edge_dim", net.cfg.edge_dim},
              {"max_degree", net.cfg.max_degree},
              {"attention", net.cfg.attention},
              {"num_heads", net.cfg.num_heads}}},
            {"schedule", {{"beta_min", sched.beta_min}, {"beta_max", sched.beta_max}}},
            {"ema", ema_weights},
            {"config_hash", config_hash},
            {"tensors", detail::tensors_to_json(named_params(net))}};
}

struct ScoreCheckpoint {
    ScoreNetwork network;
    NoiseSchedule schedule;
    bool ema = false;
};

inline ScoreCheckpoint score_network_from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != std::string("score_network"))
        throw ModelError("checkpoint kind is not 'score_network'");
    const nlohmann::json& c = j.at("config");
    ScoreConfig cfg;
    cfg.num_layers = c.at("num_layers").get<int>();
    cfg.walk_length = c.at("walk_length").get<int>();
    cfg.node_dim = c.at("node_dim").get<int>();
    cfg.edge_dim = c.at("edge_dim").get<int>();
    cfg.max_degree = c.at("max_degree").get<int>();
    cfg.attention = c.at("attention").get<bool>();
    cfg.num_heads = c.at("num_heads").get<int>();
    ScoreCheckpoint out{make_score_network(cfg, /*seed=*/0),
                        NoiseSchedule(j.at("schedule").at("beta_min").get<double>(),
                                      j.at("schedule").at("beta_max").get<double>()),
                        j.value("ema", false)};
    detail::tensors_from_json(j.at("tensors"), named_params(out.network));
    return out;
}

inline void save_classifier(const std::string& path, ClassifierModel& m,
                            const std::string& config_hash = "") {
    detail::write_json_file(path, classifier_to_json(m, config_hash));
}

inline ClassifierModel load_classifier(const std::string& path) {
    return classifier_from_json(detail::read_json_file(path));
}

inline void save_score_network(const std::string& path, ScoreNetwork& net,
                               const NoiseSchedule& sched, bool ema_weights,
                               const std::string& config_hash = "") {
    detail::write_json_file(path, score_network_to_json(net, sched, ema_weights, config_hash));
}

inline ScoreCheckpoint load_score_network(const std::string& path) {
    return score_network_from_json(detail::read_json_file(path));
}

}  // namespace gala
