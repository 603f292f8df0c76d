#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "gala/error.hpp"

namespace gala {

// Linear variance-preserving schedule beta(t) = beta_min + (beta_max - beta_min) t.
struct NoiseSchedule {
    double beta_min = 0.1;
    double beta_max = 20.0;

    NoiseSchedule() = default;
    NoiseSchedule(double bmin, double bmax) : beta_min(bmin), beta_max(bmax) {
        if (!(beta_min > 0.0) || !(beta_max > beta_min))
            throw ArgumentError("schedule requires 0 < beta_min < beta_max");
    }

    double beta(double t) const { return beta_min + (beta_max - beta_min) * t; }

    // int_0^t beta(s) ds
    double beta_integral(double t) const {
        return beta_min * t + 0.5 * (beta_max - beta_min) * t * t;
    }

    // conditional mean scale m(t) = exp(-1/2 int beta)
    double mean_scale(double t) const { return std::exp(-0.5 * beta_integral(t)); }

    // conditional variance v(t) = 1 - exp(-int beta)
    double variance(double t) const { return 1.0 - std::exp(-beta_integral(t)); }

    double stddev(double t) const { return std::sqrt(variance(t)); }
};

struct DiffusionState {
    Eigen::MatrixXd a;
    double t = 0.0;
};

inline void validate_state(const DiffusionState& s) {
    if (s.a.rows() != s.a.cols()) throw ContractError("diffusion state matrix must be square");
    if ((s.a - s.a.transpose()).cwiseAbs().maxCoeff() != 0.0)
        throw ContractError("diffusion state matrix must be symmetric");
    if (s.a.diagonal().cwiseAbs().maxCoeff() != 0.0)
        throw ContractError("diffusion state matrix must have zero diagonal");
}

}  // namespace gala
