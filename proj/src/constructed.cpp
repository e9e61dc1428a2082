#include "ecar/constructed.hpp"

#include <cmath>
#include <map>

#include "ecar/bessel.hpp"
#include "ecar/matern.hpp"

namespace ecar {

IarConditional iar_full_conditional(const IarPrior& prior, const Vector& b, Index k) {
    require(prior.L >= 2, "IAR prior needs L >= 2");
    require(b.size() == prior.L, "coefficient length mismatch");
    require(k >= 1 && k <= prior.L, "index out of range");
    const Index i = k - 1;
    if (i == 0) return {b[1], prior.sigma_b2};
    if (i == prior.L - 1) return {b[prior.L - 2], prior.sigma_b2};
    return {0.5 * (b[i - 1] + b[i + 1]), 0.5 * prior.sigma_b2};
}

Matrix iar_structure_matrix(Index L) {
    require(L >= 2, "IAR structure needs L >= 2");
    Matrix omega = Matrix::Zero(L, L);
    for (Index i = 0; i + 1 < L; ++i) {
        omega(i, i) += 1.0;
        omega(i + 1, i + 1) += 1.0;
        omega(i, i + 1) = -1.0;
        omega(i + 1, i) = -1.0;
    }
    return omega;
}

ConstructedCovariates constructed_covariates_discrete(const SpectralBasis& basis, const BSplineBasis& spline,
                                                      const Vector& x) {
    const Index n = basis.n();
    require(x.size() == n, "x length mismatch");
    require(spline.omega_lo() <= basis.omega[0] && spline.omega_hi() >= basis.omega[n - 1],
            "spline domain must cover the observed spectrum");
    const Vector xs = basis.gamma.transpose() * x;
    const Matrix bvals = spline.evaluate_matrix(basis.omega);  // n x L
    ConstructedCovariates out;
    out.basis = spline;
    out.provenance = CovProvenance::discrete;
    out.columns.resize(n, spline.size());
    for (Index l = 0; l < spline.size(); ++l)
        out.columns.col(l) = basis.gamma * (bvals.col(l).array() * xs.array()).matrix();
    return out;
}

FrequencyGrid FrequencyGrid::midpoint(Index m, double omega_max) {
    require(m >= 1, "empty frequency grid");
    require(omega_max > 0.0, "frequency ceiling must be positive");
    FrequencyGrid g;
    g.delta = omega_max / static_cast<double>(m);
    g.omega.resize(m);
    for (Index f = 0; f < m; ++f) g.omega[f] = (static_cast<double>(f) + 0.5) * g.delta;
    return g;
}

ConstructedCovariates constructed_covariates_continuous(const Matrix& sites, const Vector& x,
                                                        const BSplineBasis& spline, const FrequencyGrid& freq,
                                                        double cell_area) {
    const Index n = sites.rows();
    require(x.size() == n, "x length mismatch");
    require(freq.omega.size() >= 1, "empty frequency grid");
    require(cell_area > 0.0, "cell area must be positive");
    const Index m = freq.omega.size();
    const Matrix dist = distance_matrix(sites);
    // J0 cache over the distinct distances of the grid
    std::map<double, Index> distinct;
    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> which(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i)
            which(i, j) = distinct.emplace(dist(i, j), static_cast<Index>(distinct.size())).first->second;
    Matrix j0_table(m, distinct.size());
    for (const auto& [h, col] : distinct)
        for (Index f = 0; f < m; ++f) j0_table(f, col) = bessel_j0(freq.omega[f] * h);
    // g(f, j) = sum_i J0(omega_f h_ij) x_i * cell_area
    Matrix g(m, n);
    for (Index j = 0; j < n; ++j) {
        Vector acc = Vector::Zero(m);
        for (Index i = 0; i < n; ++i) acc += x[i] * j0_table.col(which(i, j));
        g.col(j) = acc * cell_area;
    }
    // weight w(f, l) = (omega_f / (2 pi)) B_l(omega_f) Delta_F
    const Matrix bvals = spline.evaluate_matrix(freq.omega);  // m x L
    Matrix w(m, spline.size());
    for (Index f = 0; f < m; ++f)
        w.row(f) = bvals.row(f) * (freq.omega[f] / (2.0 * M_PI) * freq.delta);
    ConstructedCovariates out;
    out.basis = spline;
    out.provenance = CovProvenance::continuous;
    out.columns = g.transpose() * w;  // n x L
    return out;
}

}  // namespace ecar
