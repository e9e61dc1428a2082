#pragma once

#include "ecar/bspline.hpp"
#include "ecar/spectral_basis.hpp"
#include "ecar/types.hpp"

namespace ecar {

// Intrinsic first-order random-walk prior on the spline coefficients b_1..b_L:
// full conditional of b_k is Normal(mean of |l-k|=1 neighbors, sigma_b2/N_k),
// N_1 = N_L = 1, interior N_k = 2.
struct IarPrior {
    double sigma_b2 = 1.0;
    Index L = 2;
};

struct IarConditional {
    double mean;
    double variance;
};

// k is 1-based to match the b_1..b_L indexing.
IarConditional iar_full_conditional(const IarPrior& prior, const Vector& b, Index k);

// RW1 structure matrix Omega (tridiagonal: diag N_k, off-diagonal -1);
// the prior precision of b is Omega / sigma_b2 (improper, rank L-1).
Matrix iar_structure_matrix(Index L);

enum class CovProvenance { discrete, continuous };

// The L constructed adjustment covariates Zhat_l.
struct ConstructedCovariates {
    Matrix columns;  // n x L
    BSplineBasis basis;
    CovProvenance provenance = CovProvenance::discrete;
};

// Discrete: Zhat_l = Gamma B_l Gamma^T x with B_l = diag(B_l(omega_k)).
// Columns sum to x when the basis partitions unity over [omega_1, omega_n].
ConstructedCovariates constructed_covariates_discrete(const SpectralBasis& basis, const BSplineBasis& spline,
                                                      const Vector& x);

// Midpoint frequency grid on (0, omega_max], omega_max = pi / max grid spacing.
struct FrequencyGrid {
    Vector omega;
    double delta;

    static FrequencyGrid midpoint(Index m, double omega_max);
};

// Continuous: Bessel-kernel smooths of the treatment field at planar sites,
//   Zhat_l(s) = sum_f (omega_f / (2 pi)) B_l(omega_f) Delta_F
//               * sum_i J_0(omega_f |s - s_i|) x_i A_i,
// where A_i is the grid cell area. This is the printed quadrature of the
// inverse Hankel transform of alpha with its overall constant fixed against
// the Sigma_zx Sigma_x^{-1} x oracle: cell-area weights replace the printed
// 1/n and the (2 pi omega)^{kappa+1} coefficient carries a 1/(2 pi)^2 factor
// (d = 2, kappa = 0).
ConstructedCovariates constructed_covariates_continuous(const Matrix& sites, const Vector& x,
                                                        const BSplineBasis& spline, const FrequencyGrid& freq,
                                                        double cell_area);

}  // namespace ecar
