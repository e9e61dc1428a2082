#pragma once

#include "ecar/types.hpp"

namespace ecar {

// Isotropic Matern process parameters in the plane.
struct MaternSpectrum {
    double nu;   // smoothness > 0
    double phi;  // range > 0
};

// m(omega; nu, phi) = nu phi^{-2 nu} (phi^{-2} + ||omega||^2)^{-(nu+1)}, d = 2.
double matern_spectral_density(const MaternSpectrum& spec, double omega_norm);

// Standard Matern correlation 2^{1-nu}/Gamma(nu) (h/phi)^nu K_nu(h/phi); 1 at h=0.
double matern_correlation(double h, double nu, double phi);

// Correlation matrix over a distance matrix; values cached per distinct
// distance (grids have few distinct separations, K_nu dominates the fill cost).
Matrix matern_correlation_matrix(const Matrix& dist, double nu, double phi);

// Pairwise Euclidean distances of planar sites (n x 2).
Matrix distance_matrix(const Matrix& sites);

}  // namespace ecar
