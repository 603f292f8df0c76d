#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gala/error.hpp"

namespace gala {

// Every knob of the pipeline; defaults are the published values. Serialized as
// flat key=value lines with dotted keys (see config_fields).
struct ExperimentConfig {
    std::string task = "adapt";
    std::string data_source;  // TU directory or canonical JSON file
    std::string data_target;
    std::string out_dir = "out";
    int seeds = 5;
    std::uint64_t seed = 0;

    // classifier
    int cls_layers = 3;
    int cls_hidden = 64;
    double cls_lr = 1e-3;
    int cls_epochs = 100;
    int cls_batch = 64;
    std::string cls_pooling = "mean";

    // diffusion
    int diff_layers = 4;
    int diff_walk = 4;
    int diff_node_dim = 32;
    int diff_edge_dim = 32;
    double diff_lr = 2e-5;
    int diff_batch = 128;
    int diff_epochs = 200;
    double ema_momentum = 0.9999;
    double beta_min = 0.1;
    double beta_max = 20.0;
    double dt = 1e-3;
    double t_recon = 0.1;
    bool attention = false;
    int attention_heads = 8;

    // curriculum + adaptation
    double alpha_start = 0.95;
    double alpha_end = 0.99;
    int adapt_epochs = 50;
    double adapt_lr = 1e-3;
    int adapt_batch = 64;
    bool re_reconstruct = false;  // redo reconstruction every epoch instead of once

    // synthetic benchmark
    int synth_graphs = 200;
    int synth_min_nodes = 12;
    int synth_max_nodes = 24;
    double synth_source_intra = 0.35;
    double synth_source_inter = 0.05;
    double synth_target_intra = 0.7;
    double synth_target_inter = 0.2;
    int synth_max_degree = 10;
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ArgumentError("bad numeric config value: '" + s + "'");
    }
}

inline long parse_long(const std::string& s) {
    try {
        size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ArgumentError("bad integer config value: '" + s + "'");
    }
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ArgumentError("bad boolean config value: '" + s + "'");
}

}  // namespace detail

struct ConfigField {
    std::string key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

inline const std::vector<ConfigField>& config_fields() {
    using C = ExperimentConfig;
    auto str = [](const std::string& key, std::string C::* f) {
        return ConfigField{key, [f](const C& c) { return c.*f; },
                           [f](C& c, const std::string& v) { c.*f = v; }};
    };
    auto num = [](const std::string& key, double C::* f) {
        return ConfigField{key, [f](const C& c) { return detail::fmt_double(c.*f); },
                           [f](C& c, const std::string& v) { c.*f = detail::parse_double(v); }};
    };
    auto integer = [](const std::string& key, int C::* f) {
        return ConfigField{key, [f](const C& c) { return std::to_string(c.*f); },
                           [f](C& c, const std::string& v) { c.*f = static_cast<int>(detail::parse_long(v)); }};
    };
    auto boolean = [](const std::string& key, bool C::* f) {
        return ConfigField{key, [f](const C& c) { return (c.*f) ? std::string("true") : std::string("false"); },
                           [f](C& c, const std::string& v) { c.*f = detail::parse_bool(v); }};
    };
    static const std::vector<ConfigField> fields = {
        str("task", &C::task),
        str("data.source", &C::data_source),
        str("data.target", &C::data_target),
        str("out_dir", &C::out_dir),
        integer("seeds", &C::seeds),
        ConfigField{"seed", [](const C& c) { return std::to_string(c.seed); },
                    [](C& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(detail::parse_long(v)); }},
        integer("classifier.layers", &C::cls_layers),
        integer("classifier.hidden_dim", &C::cls_hidden),
        num("classifier.lr", &C::cls_lr),
        integer("classifier.epochs", &C::cls_epochs),
        integer("classifier.batch", &C::cls_batch),
        str("classifier.pooling", &C::cls_pooling),
        integer("diffusion.layers", &C::diff_layers),
        integer("diffusion.walk_length", &C::diff_walk),
        integer("diffusion.node_dim", &C::diff_node_dim),
        integer("diffusion.edge_dim", &C::diff_edge_dim),
        num("diffusion.lr", &C::diff_lr),
        integer("diffusion.batch", &C::diff_batch),
        integer("diffusion.epochs", &C::diff_epochs),
        num("diffusion.ema_momentum", &C::ema_momentum),
        num("diffusion.beta_min", &C::beta_min),
        num("diffusion.beta_max", &C::beta_max),
        num("diffusion.dt", &C::dt),
        num("diffusion.t_recon", &C::t_recon),
        boolean("diffusion.attention", &C::attention),
        integer("diffusion.attention_heads", &C::attention_heads),
        num("curriculum.alpha_start", &C::alpha_start),
        num("curriculum.alpha_end", &C::alpha_end),
        integer("adapt.epochs", &C::adapt_epochs),
        num("adapt.lr", &C::adapt_lr),
        integer("adapt.batch", &C::adapt_batch),
        boolean("adapt.re_reconstruct", &C::re_reconstruct),
        integer("synthetic.graphs_per_domain", &C::synth_graphs),
        integer("synthetic.min_nodes", &C::synth_min_nodes),
        integer("synthetic.max_nodes", &C::synth_max_nodes),
        num("synthetic.source_intra", &C::synth_source_intra),
        num("synthetic.source_inter", &C::synth_source_inter),
        num("synthetic.target_intra", &C::synth_target_intra),
        num("synthetic.target_inter", &C::synth_target_inter),
        integer("synthetic.max_degree", &C::synth_max_degree),
    };
    return fields;
}

inline void apply_config_value(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
    for (const ConfigField& f : config_fields())
        if (f.key == key) {
            f.set(cfg, value);
            return;
        }
    throw ArgumentError("unknown config key: '" + key + "'");
}

// Parses "key = value" lines; '#' starts a comment; unknown keys are errors.
inline void parse_config_text(ExperimentConfig& cfg, const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(ss, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ArgumentError("config line missing '=': '" + line + "'");
        apply_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

inline ExperimentConfig parse_config_file(const std::string& path,
                                          ExperimentConfig base = ExperimentConfig{}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    parse_config_text(base, ss.str());
    return base;
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
    std::string out;
    for (const ConfigField& f : config_fields()) out += f.key + " = " + f.get(cfg) + "\n";
    return out;
}

// FNV-1a of the serialized config, stamped into checkpoints.
inline std::string config_hash(const ExperimentConfig& cfg) {
    const std::string s = serialize_config(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace gala
