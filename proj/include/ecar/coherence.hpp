#pragma once

#include <optional>

#include "ecar/matern.hpp"
#include "ecar/types.hpp"

namespace ecar {

// Bivariate Matern with a common range. Flexible model: nu_xz free subject to
// nu_xz > max{nu_x, (nu_x+nu_z)/2} and rho^2 < nu_x nu_z / nu_xz^2.
// Parsimonious model: nu_xz = (nu_x+nu_z)/2 and |rho| < sqrt(nu_x nu_z)/nu_xz.
struct BivariateMaternParams {
    double nu_x, nu_z, nu_xz;
    double phi;
    double sigma_x = 1.0, sigma_z = 1.0;
    double rho = 0.0;

    bool flexible_valid() const;
    bool parsimonious_valid() const;
};

// Bivariate Leroux CAR spectral model. Parsimonious flag selects the
// geometric-mean cross spectrum f_xz = sqrt(f_x f_z).
struct BivariateCarParams {
    double lambda_x, lambda_z, lambda_xz = 0.0;
    double sigma_x = 1.0, sigma_z = 1.0;
    double rho = 0.0;
    bool parsimonious = true;
};

// Confounder projection alpha(omega) for the common-range bivariate Matern:
// rho (sigma_z/sigma_x) (phi^{-2} + ||omega||^2)^{-(nu_xz - nu_x)}.
double alpha_matern_common_range(const BivariateMaternParams& p, double omega_norm);

// Parsimonious Matern: rho (sigma_z/sigma_x) (phi^{-2} + ||omega||^2)^{-(nu_z - nu_x)/2}.
double alpha_matern_parsimonious(const BivariateMaternParams& p, double omega_norm);

// CAR adjustment. General: rho (sigma_z/sigma_x) (1-lambda_x+lambda_x w)/(1-lambda_xz+lambda_xz w).
// Parsimonious: rho (sigma_z/sigma_x) sqrt((1-lambda_x+lambda_x w)/(1-lambda_z+lambda_z w)).
double alpha_car(const BivariateCarParams& p, double omega_k);

// Residual confounder spectrum. General:
//   sigma_z^2/(1-lambda_z+lambda_z w) - rho^2 sigma_z^2 (1-lambda_x+lambda_x w)/(1-lambda_xz+lambda_xz w)^2;
// parsimonious: sigma_z^2 (1-rho^2)/(1-lambda_z+lambda_z w). A negative value
// signals a positive-definiteness violation and is an error.
double tau2_car(const BivariateCarParams& p, double omega_k);

struct PdCheck {
    bool ok = true;
    std::optional<double> violating_omega;
};

// Validity of the general bivariate CAR at the observed eigenvalues:
// rho^2 (1-lambda_x+lambda_x w)(1-lambda_z+lambda_z w) < (1-lambda_xz+lambda_xz w)^2.
PdCheck check_car_positive_definite(const BivariateCarParams& p, const Vector& eigenvalues);

// Oracle adjustment Zhat = Sigma_zx Sigma_x^{-1} x by Cholesky solve.
Vector oracle_adjustment(const Matrix& sigma_zx, const Matrix& sigma_x, const Vector& x);

// Appendix-style identifiability mapping for the parsimonious CAR, stated in
// the precision convention tau = 1/(sigma_z^2 (1-rho^2)), eta = rho sigma_z:
//   rho = sign(eta) sqrt(eta^2/(tau^{-1}+eta^2)),  sigma_z^2 = tau^{-1} + eta^2.
struct RhoSigma {
    double rho;
    double sigma_z2;
};
RhoSigma rho_sigma_from_tau_eta(double tau, double eta);
struct TauEta {
    double tau;
    double eta;
};
TauEta tau_eta_from_rho_sigma(double rho, double sigma_z2);

}  // namespace ecar
