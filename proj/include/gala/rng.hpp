#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace gala {

// splitmix64, used to decorrelate derived seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    return mix_seed(mix_seed(seed) ^ mix_seed(salt));
}

// Seeded random stream. One instance per logical task (per graph, per epoch, ...)
// so results do not depend on scheduling or call order elsewhere.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(mix_seed(seed)) {}

    // Independent stream for (seed, index); same pair always yields the same stream.
    static RngStream derive(std::uint64_t seed, std::uint64_t index) {
        return RngStream(mix_seed(mix_seed(seed) ^ mix_seed(index ^ 0x5851f42d4c957f2dULL)));
    }

    std::mt19937_64& engine() { return engine_; }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    // Uniform integer in [0, n).
    int uniform_int(int n) {
        return static_cast<int>(std::uniform_int_distribution<long>(0, n - 1)(engine_));
    }

    double gaussian() { return normal_(engine_); }

    Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal_(engine_);
        return m;
    }

    Eigen::VectorXd gaussian_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = normal_(engine_);
        return v;
    }

    // N(0,1) on the upper triangle, mirrored below, zero diagonal.
    Eigen::MatrixXd symmetric_gaussian(Eigen::Index n) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                double z = normal_(engine_);
                m(i, j) = z;
                m(j, i) = z;
            }
        }
        return m;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), engine_);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gala
