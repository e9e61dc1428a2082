#pragma once

// Shared helpers for the statistical test suites: two-sample
// Kolmogorov-Smirnov machinery and small lattice fixtures.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ecar/adjacency.hpp"
#include "ecar/spectral_basis.hpp"
#include "ecar/types.hpp"

namespace ecar_test {

// Two-sample Kolmogorov-Smirnov statistic: sup_t |F_a(t) - F_b(t)|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const std::size_t n = a.size(), m = b.size();
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < n && j < m) {
        const double t = std::min(a[i], b[j]);
        while (i < n && a[i] <= t) ++i;
        while (j < m && b[j] <= t) ++j;
        d = std::max(d, std::abs(double(i) / double(n) - double(j) / double(m)));
    }
    return d;
}

// Kolmogorov tail Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2),
// evaluated with the small-sample effective-size correction of Stephens.
inline double ks_p_value(double d, std::size_t n, std::size_t m) {
    const double ne = double(n) * double(m) / double(n + m);
    const double sq = std::sqrt(ne);
    const double lambda = (sq + 0.12 + 0.11 / sq) * d;
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * double(j) * double(j) * lambda * lambda);
        sum += sign * term;
        if (term < 1e-12) break;
        sign = -sign;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

inline double ks_p_value(const std::vector<double>& a, const std::vector<double>& b) {
    return ks_p_value(ks_statistic(a, b), a.size(), b.size());
}

inline std::vector<double> column_vector(const ecar::Matrix& draws, ecar::Index col) {
    std::vector<double> v(std::size_t(draws.rows()));
    for (ecar::Index i = 0; i < draws.rows(); ++i) v[std::size_t(i)] = draws(i, col);
    return v;
}

// Thin a chain to every k-th value to blunt autocorrelation before a KS test.
inline std::vector<double> thin(const std::vector<double>& v, std::size_t k) {
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); i += k) out.push_back(v[i]);
    return out;
}

struct LatticeFixture {
    ecar::AdjacencyGraph graph;
    ecar::SpectralBasis basis;
};

inline LatticeFixture make_lattice(ecar::Index rows, ecar::Index cols) {
    LatticeFixture f{ecar::build_lattice_adjacency(rows, cols), {}};
    f.basis = ecar::spectral_basis_of(f.graph);
    return f;
}

// Dense neighborhood matrix R = Gamma diag(omega) Gamma^T, for oracle
// covariance computations.
inline ecar::Matrix dense_neighborhood(const ecar::SpectralBasis& basis) {
    return basis.gamma * basis.omega.asDiagonal() * basis.gamma.transpose();
}

}  // namespace ecar_test
