#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "gala/error.hpp"
#include "gala/rng.hpp"

namespace gala {

// One learnable tensor with its gradient accumulator (vectors are 1 x n).
struct Param {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;

    Param() = default;
    Param(Eigen::Index rows, Eigen::Index cols)
        : value(Eigen::MatrixXd::Zero(rows, cols)), grad(Eigen::MatrixXd::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
};

using ParamRefs = std::vector<Param*>;

inline void zero_grads(const ParamRefs& params) {
    for (Param* p : params) p->zero_grad();
}

inline Eigen::MatrixXd glorot_uniform(int rows, int cols, RngStream& rng) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
    return m;
}

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

// dL/dx for y = relu(x), given dL/dy and y itself (y > 0 iff x > 0).
inline Eigen::MatrixXd relu_backward(const Eigen::MatrixXd& y, const Eigen::MatrixXd& dy) {
    return (y.array() > 0.0).select(dy, 0.0);
}

// Row-wise max-subtracted softmax.
inline Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
    const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
    return e / e.sum();
}

inline Eigen::VectorXd log_softmax(const Eigen::VectorXd& z) {
    const Eigen::ArrayXd shifted = z.array() - z.maxCoeff();
    return (shifted - std::log(shifted.exp().sum())).matrix();
}

inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
    Eigen::MatrixXd out(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        out.row(i) = softmax(z.row(i).transpose()).transpose();
    return out;
}

// y = x * W + b, rows of x are samples.
struct Linear {
    Param weight;  // in x out
    Param bias;    // 1 x out

    Linear() = default;
    Linear(int in, int out, RngStream& rng) : weight(in, out), bias(1, out) {
        weight.value = glorot_uniform(in, out, rng);
    }

    int in_dim() const { return static_cast<int>(weight.value.rows()); }
    int out_dim() const { return static_cast<int>(weight.value.cols()); }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
        return (x * weight.value).rowwise() + bias.value.row(0);
    }

    // Accumulates parameter grads and returns dL/dx.
    Eigen::MatrixXd backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy) {
        weight.grad.noalias() += x.transpose() * dy;
        bias.grad.row(0) += dy.colwise().sum();
        return dy * weight.value.transpose();
    }

    void collect(ParamRefs& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

// Linear stack with ReLU between layers (and after the last iff relu_last).
struct Mlp {
    std::vector<Linear> layers;
    bool relu_last = false;

    Mlp() = default;
    Mlp(const std::vector<int>& dims, bool relu_last_, RngStream& rng) : relu_last(relu_last_) {
        if (dims.size() < 2) throw ArgumentError("mlp needs at least one layer");
        for (size_t i = 0; i + 1 < dims.size(); ++i) layers.emplace_back(dims[i], dims[i + 1], rng);
    }

    struct Trace {
        std::vector<Eigen::MatrixXd> inputs;  // input to each layer
        Eigen::MatrixXd output;               // post-activation output
    };

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd h = x;
        for (size_t i = 0; i < layers.size(); ++i) {
            h = layers[i].forward(h);
            if (i + 1 < layers.size() || relu_last) h = relu(h);
        }
        return h;
    }

    Trace forward_trace(const Eigen::MatrixXd& x) const {
        Trace t;
        Eigen::MatrixXd h = x;
        for (size_t i = 0; i < layers.size(); ++i) {
            t.inputs.push_back(h);
            h = layers[i].forward(h);
            if (i + 1 < layers.size() || relu_last) h = relu(h);
        }
        t.output = h;
        return t;
    }

    Eigen::MatrixXd backward(const Trace& t, Eigen::MatrixXd dy) {
        for (size_t k = layers.size(); k-- > 0;) {
            const bool activated = (k + 1 < layers.size()) || relu_last;
            if (activated) {
                // post-activation of layer k is the input cached for layer k+1
                const Eigen::MatrixXd& post = (k + 1 < layers.size()) ? t.inputs[k + 1] : t.output;
                dy = relu_backward(post, dy);
            }
            dy = layers[k].backward(t.inputs[k], dy);
        }
        return dy;
    }

    void collect(ParamRefs& out) {
        for (auto& l : layers) l.collect(out);
    }
};

// Standard Adam on a flat parameter list; call step() after grads are filled.
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<Eigen::MatrixXd> m, v;

    explicit Adam(double lr_ = 1e-3) : lr(lr_) {}

    void init(const ParamRefs& params) {
        m.clear();
        v.clear();
        for (const Param* p : params) {
            m.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
            v.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
        }
        step_count = 0;
    }

    void step(const ParamRefs& params) {
        if (m.size() != params.size()) throw ContractError("adam not initialized for this parameter list");
        ++step_count;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (size_t i = 0; i < params.size(); ++i) {
            const Eigen::MatrixXd& g = params[i]->grad;
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g.cwiseProduct(g);
            params[i]->value.array() -=
                lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + eps);
        }
    }
};

// Exponential moving average of parameters with warmup-ramped momentum
// min(momentum, (1 + step) / (10 + step)).
struct Ema {
    double momentum = 0.9999;
    long step_count = 0;
    std::vector<Eigen::MatrixXd> shadow;

    explicit Ema(double momentum_ = 0.9999) : momentum(momentum_) {}

    void init(const ParamRefs& params) {
        shadow.clear();
        for (const Param* p : params) shadow.push_back(p->value);
        step_count = 0;
    }

    void update(const ParamRefs& params) {
        if (shadow.size() != params.size()) throw ContractError("ema not initialized for this parameter list");
        const double eff = std::min(momentum, (1.0 + step_count) / (10.0 + step_count));
        for (size_t i = 0; i < params.size(); ++i)
            shadow[i] = eff * shadow[i] + (1.0 - eff) * params[i]->value;
        ++step_count;
    }

    void copy_to(const ParamRefs& params) const {
        if (shadow.size() != params.size()) throw ContractError("ema not initialized for this parameter list");
        for (size_t i = 0; i < params.size(); ++i) params[i]->value = shadow[i];
    }
};

}  // namespace gala
