#include "ecar/spectral_basis.hpp"

#include <cmath>

namespace ecar {

SpectralBasis spectral_decompose(const Matrix& R) {
    require(R.rows() == R.cols() && R.rows() >= 1, "R must be square");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(R);
    if (solver.info() != Eigen::Success) throw numeric_error("eigendecomposition did not converge");
    SpectralBasis basis;
    basis.omega = solver.eigenvalues();         // ascending by construction
    basis.gamma = solver.eigenvectors();
    const Index n = basis.omega.size();
    // clamp tiny negative round-off on the zero eigenvalue
    for (Index k = 0; k < n; ++k)
        if (std::abs(basis.omega[k]) < 1e-9) basis.omega[k] = 0.0;
    // deterministic sign: largest-magnitude entry positive, ties to lowest index
    for (Index k = 0; k < n; ++k) {
        Index arg = 0;
        double best = -1.0;
        for (Index i = 0; i < n; ++i) {
            const double a = std::abs(basis.gamma(i, k));
            if (a > best + 1e-14) {
                best = a;
                arg = i;
            }
        }
        if (basis.gamma(arg, k) < 0.0) basis.gamma.col(k) *= -1.0;
    }
    basis.col_sums = basis.gamma.colwise().sum();
    return basis;
}

SpectralBasis spectral_basis_of(const AdjacencyGraph& g) {
    require(g.n_components() == 1, "graph must be connected");
    return spectral_decompose(neighborhood_matrix(g));
}

Vector graph_fourier(const SpectralBasis& basis, const Vector& v) {
    require(v.size() == basis.n(), "vector length does not match basis");
    return basis.gamma.transpose() * v;
}

Vector graph_fourier_inverse(const SpectralBasis& basis, const Vector& v) {
    require(v.size() == basis.n(), "vector length does not match basis");
    return basis.gamma * v;
}

}  // namespace ecar
