#pragma once

// Seeded random generators for the property tests.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lumen/device.hpp"

namespace gen {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& r, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(r);
}

inline int integer(std::mt19937_64& r, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(r);
}

inline std::vector<double> vec(std::mt19937_64& r, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = uniform(r, lo, hi);
    return v;
}

inline std::vector<std::int64_t> ints(std::mt19937_64& r, std::size_t n, std::int64_t lo, std::int64_t hi) {
    std::uniform_int_distribution<std::int64_t> d(lo, hi);
    std::vector<std::int64_t> v(n);
    for (auto& x : v) x = d(r);
    return v;
}

/// Symmetric, unit diagonal, off-diagonals in [0, 1), positive definite.
inline Eigen::MatrixXd pd_coupling(std::mt19937_64& r, int n) {
    for (;;) {
        Eigen::MatrixXd k = Eigen::MatrixXd::Identity(n, n);
        const double scale = uniform(r, 0.0, 1.5 / std::max(1, n - 1));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) k(i, j) = k(j, i) = std::min(0.95, scale * uniform(r, 0.0, 1.0));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
        if (es.eigenvalues().minCoeff() > 1e-3) return k;
    }
}

inline lumen::MRDesign design(std::mt19937_64& r) {
    lumen::MRDesign d;
    d.name = "random";
    d.q_factor = uniform(r, 500, 10000);
    d.extinction_db = uniform(r, 5, 30);
    d.fsr_nm = uniform(r, 10, 40);
    d.resonant_wavelength_nm = uniform(r, 1500, 1600);
    return d;
}

}  // namespace gen
