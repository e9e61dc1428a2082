#pragma once

#include <cstdint>
#include <vector>

#include "ecar/spectral_basis.hpp"
#include "ecar/types.hpp"

namespace ecar {

// Row-stochastic Gaussian kernel smoother over point locations:
// w_ij proportional to exp(-(|s_i - s_j| / phi)^2), rows normalized to sum
// to one. The diagonal is included (distance zero), so W 1 = 1 exactly and
// phi -> 0 recovers the identity.
struct KernelSmoother {
    Matrix w;
    double phi = 1.0;
};

KernelSmoother kernel_smoothing_matrix(const Matrix& sites, double phi);

// Integer lattice coordinates (row-major, unit spacing), n = rows * cols.
Matrix lattice_sites(Index rows, Index cols);

// Regular grid over the unit square, spacing 1/(rows-1) by 1/(cols-1).
Matrix unit_square_sites(Index rows, Index cols);

// Areal ground truth: X a mean-zero CAR field, Z a CAR field centered on a
// smoothed copy of X, Y Gaussian around beta_x X + beta_z Z. The smoothing
// bandwidth phi controls how far the X->Z dependence reaches and beta_xz its
// strength; beta_xz = 0 makes Z independent of X.
struct DiscreteScenario {
    Index rows = 40;
    Index cols = 40;
    double sigma_x2 = 1.7;
    double sigma_z2 = 1.0;
    double lambda = 0.95;
    double beta_x = 0.5;
    double beta_z = 0.5;
    double sigma2 = 0.0625;  // 0.25^2 noise variance
    double beta_xz = 1.0;
    double phi = 1.0;  // smoother bandwidth in lattice units
};

// Geostatistical ground truth on a regular grid in the unit square: X and Z
// Matern fields, Z centered on a kernel-smoothed copy of X.
struct ContinuousScenario {
    Index rows = 23;
    Index cols = 23;
    double sigma_x2 = 1.0;
    double sigma_z2 = 1.0;
    double phi_x = 0.1;
    double phi_z = 0.1;
    double nu_x = 0.5;
    double nu_z = 0.5;
    double beta_x = 1.0;
    double beta_z = 1.0;
    double sigma2 = 0.0625;  // 0.25^2
    double beta_xz = 1.0;
    double phi = 1.0 / 15.0;  // smoother bandwidth
};

struct SimulatedFields {
    Vector x;
    Vector z;
    Vector y;
};

// Caches the smoother and the CAR spectral scale so repeated draws cost one
// matrix-vector product each. The basis must come from the scenario lattice.
class DiscreteSimulator {
  public:
    DiscreteSimulator(const DiscreteScenario& scenario, const SpectralBasis& basis);

    SimulatedFields draw(std::uint64_t seed) const;
    const DiscreteScenario& scenario() const { return scenario_; }

  private:
    DiscreteScenario scenario_;
    const SpectralBasis* basis_;
    Matrix w_;
    Vector car_scale_;  // (1 - lambda + lambda omega_k)^{-1/2}
};

SimulatedFields simulate_discrete(const DiscreteScenario& scenario, const SpectralBasis& basis, std::uint64_t seed);

// Caches site coordinates, the smoother, and Cholesky factors of the two
// Matern correlation matrices.
class ContinuousSimulator {
  public:
    explicit ContinuousSimulator(const ContinuousScenario& scenario);

    SimulatedFields draw(std::uint64_t seed) const;
    const Matrix& sites() const { return sites_; }
    const ContinuousScenario& scenario() const { return scenario_; }

  private:
    ContinuousScenario scenario_;
    Matrix sites_;
    Matrix w_;
    Matrix chol_x_;  // lower Cholesky of the X correlation
    Matrix chol_z_;
};

SimulatedFields simulate_continuous(const ContinuousScenario& scenario, std::uint64_t seed);

// Per-frequency correlation across replicated field pairs: element k is the
// sample correlation of (Gamma^T x)[k] with (Gamma^T z)[k] over replicates.
Vector spectral_correlation_diagnostic(const std::vector<Vector>& xs, const std::vector<Vector>& zs,
                                       const SpectralBasis& basis);

}  // namespace ecar
