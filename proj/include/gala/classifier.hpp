#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gala/graph.hpp"
#include "gala/nn.hpp"
#include "gala/rng.hpp"

namespace gala {

enum class Pooling { mean, sum };

inline std::string pooling_name(Pooling p) { return p == Pooling::mean ? "mean" : "sum"; }
inline Pooling pooling_from_name(const std::string& s) {
    if (s == "mean") return Pooling::mean;
    if (s == "sum") return Pooling::sum;
    throw ArgumentError("unknown pooling kind: " + s);
}

struct LabelDistribution {
    Eigen::VectorXd probs;
};

inline void validate_distribution(const LabelDistribution& d) {
    if ((d.probs.array() < 0.0).any()) throw ContractError("label distribution has negative entry");
    if (std::abs(d.probs.sum() - 1.0) > 1e-6) throw ContractError("label distribution does not sum to 1");
}

// Message-passing classifier: K rounds of GCN aggregation (symmetric
// normalization with self-loops), global pooling, then a 2-layer head.
struct ClassifierModel {
    int num_layers = 3;
    int hidden_dim = 64;
    int input_dim = 0;
    int num_classes = 0;
    Pooling pooling = Pooling::mean;
    std::vector<Linear> layers;  // combine weights, layer k maps prev width -> hidden
    Mlp head;                    // hidden -> hidden -> C with inner ReLU

    ParamRefs params() {
        ParamRefs out;
        for (auto& l : layers) l.collect(out);
        head.collect(out);
        return out;
    }
};

inline ClassifierModel make_classifier(int input_dim, int num_classes, std::uint64_t seed,
                                       int num_layers = 3, int hidden_dim = 64,
                                       Pooling pooling = Pooling::mean) {
    if (input_dim < 1 || num_classes < 1 || num_layers < 1 || hidden_dim < 1)
        throw ArgumentError("classifier dimensions must be positive");
    ClassifierModel m;
    m.num_layers = num_layers;
    m.hidden_dim = hidden_dim;
    m.input_dim = input_dim;
    m.num_classes = num_classes;
    m.pooling = pooling;
    RngStream rng(seed);
    for (int k = 0; k < num_layers; ++k)
        m.layers.emplace_back(k == 0 ? input_dim : hidden_dim, hidden_dim, rng);
    m.head = Mlp({hidden_dim, hidden_dim, num_classes}, false, rng);
    return m;
}

// A_hat = D^{-1/2} (A + I) D^{-1/2}, degrees taken from A + I.
inline Eigen::MatrixXd normalized_adjacency(const Graph& g) {
    Eigen::MatrixXd a = adjacency_matrix(g);
    a.diagonal().array() += 1.0;
    const Eigen::VectorXd inv_sqrt_deg = a.rowwise().sum().array().rsqrt();
    return inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal();
}

inline Eigen::VectorXd global_pool(const Eigen::MatrixXd& node_embeddings, Pooling kind) {
    if (node_embeddings.rows() == 0) throw ArgumentError("cannot pool an empty embedding matrix");
    Eigen::VectorXd pooled = node_embeddings.colwise().sum().transpose();
    if (kind == Pooling::mean) pooled /= static_cast<double>(node_embeddings.rows());
    return pooled;
}

// Everything needed to run the classifier backward from dlogits.
struct ClassifierTrace {
    Eigen::MatrixXd a_hat;
    std::vector<Eigen::MatrixXd> node_states;  // H^0 .. H^K (H^0 = attributes)
    std::vector<Eigen::MatrixXd> aggregated;   // Z^k = A_hat H^k
    Eigen::VectorXd pooled;
    Mlp::Trace head_trace;
    Eigen::VectorXd logits;
    Eigen::VectorXd probs;
};

inline ClassifierTrace classifier_forward(const Graph& g, const ClassifierModel& m) {
    if (g.attribute_dim() != m.input_dim)
        throw ShapeError("attribute width " + std::to_string(g.attribute_dim()) +
                         " does not match model input width " + std::to_string(m.input_dim));
    ClassifierTrace t;
    t.a_hat = normalized_adjacency(g);
    t.node_states.push_back(g.node_attributes);
    for (const Linear& layer : m.layers) {
        t.aggregated.push_back(t.a_hat * t.node_states.back());
        t.node_states.push_back(relu(layer.forward(t.aggregated.back())));
    }
    const Eigen::MatrixXd& h = t.node_states.back();
    if (h.rows() == 0) throw ArgumentError("cannot pool an empty embedding matrix");
    t.pooled = global_pool(h, m.pooling);
    t.head_trace = m.head.forward_trace(t.pooled.transpose());
    t.logits = t.head_trace.output.row(0).transpose();
    t.probs = softmax(t.logits);
    return t;
}

inline Eigen::MatrixXd encode_nodes(const Graph& g, const ClassifierModel& m) {
    return classifier_forward(g, m).node_states.back();
}

inline LabelDistribution classify(const Graph& g, const ClassifierModel& m) {
    return LabelDistribution{classifier_forward(g, m).probs};
}

// Accumulates parameter gradients for one graph given dL/dlogits.
inline void classifier_backward(const ClassifierTrace& t, const Eigen::VectorXd& dlogits,
                                ClassifierModel& m) {
    Eigen::MatrixXd dpooled = m.head.backward(t.head_trace, dlogits.transpose());
    const Eigen::Index n = t.node_states.back().rows();
    Eigen::MatrixXd dh;
    if (m.pooling == Pooling::mean)
        dh = Eigen::MatrixXd::Ones(n, 1) * (dpooled / static_cast<double>(n));
    else
        dh = Eigen::MatrixXd::Ones(n, 1) * dpooled;
    for (size_t k = m.layers.size(); k-- > 0;) {
        const Eigen::MatrixXd dz = relu_backward(t.node_states[k + 1], dh);
        dh = t.a_hat.transpose() * m.layers[k].backward(t.aggregated[k], dz);
    }
}

// Cross-entropy pieces: loss and the matching dlogits = p - onehot(y).
inline double cross_entropy(const Eigen::VectorXd& logits, int y) {
    const Eigen::VectorXd logp = log_softmax(logits);
    return -logp(y);
}

inline Eigen::VectorXd cross_entropy_dlogits(const Eigen::VectorXd& probs, int y) {
    Eigen::VectorXd d = probs;
    d(y) -= 1.0;
    return d;
}

// Mean cross-entropy over a labeled batch; gradients accumulate into the model.
inline double classifier_batch_gradients(const std::vector<const Graph*>& batch,
                                         ClassifierModel& m) {
    if (batch.empty()) throw ArgumentError("gradient batch must be nonempty");
    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const Graph* g : batch) {
        if (!g->label) throw ContractError("cross-entropy batch requires labeled graphs");
        const ClassifierTrace t = classifier_forward(*g, m);
        loss += cross_entropy(t.logits, *g->label) * inv;
        classifier_backward(t, Eigen::VectorXd(cross_entropy_dlogits(t.probs, *g->label) * inv), m);
    }
    return loss;
}

inline int argmax_class(const Eigen::VectorXd& probs) {
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    return static_cast<int>(best);
}

inline double classifier_accuracy(const Dataset& d, const ClassifierModel& m) {
    if (d.graphs.empty()) throw ArgumentError("cannot evaluate on an empty dataset");
    int correct = 0;
    for (const Graph& g : d.graphs) {
        if (!g.label) throw ContractError("accuracy requires labeled graphs");
        if (argmax_class(classify(g, m).probs) == *g.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(d.graphs.size());
}

struct PretrainConfig {
    double learning_rate = 1e-3;
    int epochs = 100;
    int batch_size = 64;
    std::uint64_t seed = 0;
    int num_layers = 3;
    int hidden_dim = 64;
    Pooling pooling = Pooling::mean;
};

struct PretrainResult {
    ClassifierModel model;
    std::vector<double> epoch_losses;
};

// Source-domain supervised training: Adam on mean cross-entropy.
inline PretrainResult pretrain_source(const Dataset& d, const PretrainConfig& cfg) {
    validate_dataset(d);
    for (const Graph& g : d.graphs)
        if (!g.label) throw ContractError("pretraining requires a fully labeled dataset");

    PretrainResult out;
    out.model = make_classifier(d.attribute_dim, d.num_classes, mix_seed(cfg.seed, 0x11),
                                cfg.num_layers, cfg.hidden_dim, cfg.pooling);
    ParamRefs params = out.model.params();
    Adam opt(cfg.learning_rate);
    opt.init(params);
    RngStream shuffler(mix_seed(cfg.seed, 0x12));

    std::vector<int> order(d.graphs.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffler.shuffle(order);
        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::vector<const Graph*> batch;
            for (size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
                batch.push_back(&d.graphs[order[i]]);
            zero_grads(params);
            epoch_loss += classifier_batch_gradients(batch, out.model);
            opt.step(params);
            ++batches;
        }
        out.epoch_losses.push_back(epoch_loss / std::max(batches, 1));
    }
    return out;
}

}  // namespace gala
