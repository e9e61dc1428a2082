#include "ecar/coherence.hpp"

#include <cmath>

#include "ecar/car.hpp"

namespace ecar {

bool BivariateMaternParams::flexible_valid() const {
    if (nu_x <= 0.0 || nu_z <= 0.0 || phi <= 0.0 || sigma_x <= 0.0 || sigma_z <= 0.0) return false;
    if (!(nu_xz > nu_x && 2.0 * nu_xz >= nu_x + nu_z)) return false;
    return rho * rho < nu_x * nu_z / (nu_xz * nu_xz);
}

bool BivariateMaternParams::parsimonious_valid() const {
    if (nu_x <= 0.0 || nu_z <= 0.0 || phi <= 0.0 || sigma_x <= 0.0 || sigma_z <= 0.0) return false;
    if (std::abs(nu_xz - 0.5 * (nu_x + nu_z)) > 1e-12) return false;
    return std::abs(rho) < std::sqrt(nu_x * nu_z) / (0.5 * (nu_x + nu_z));
}

double alpha_matern_common_range(const BivariateMaternParams& p, double omega_norm) {
    const double base = 1.0 / (p.phi * p.phi) + omega_norm * omega_norm;
    return p.rho * (p.sigma_z / p.sigma_x) * std::pow(base, -(p.nu_xz - p.nu_x));
}

double alpha_matern_parsimonious(const BivariateMaternParams& p, double omega_norm) {
    const double base = 1.0 / (p.phi * p.phi) + omega_norm * omega_norm;
    return p.rho * (p.sigma_z / p.sigma_x) * std::pow(base, -0.5 * (p.nu_z - p.nu_x));
}

double alpha_car(const BivariateCarParams& p, double omega_k) {
    const double fx_prec = leroux_precision(p.lambda_x, omega_k);
    if (p.parsimonious) {
        const double fz_prec = leroux_precision(p.lambda_z, omega_k);
        return p.rho * (p.sigma_z / p.sigma_x) * std::sqrt(fx_prec / fz_prec);
    }
    const double fxz_prec = leroux_precision(p.lambda_xz, omega_k);
    return p.rho * (p.sigma_z / p.sigma_x) * fx_prec / fxz_prec;
}

double tau2_car(const BivariateCarParams& p, double omega_k) {
    const double sz2 = p.sigma_z * p.sigma_z;
    const double fz_prec = leroux_precision(p.lambda_z, omega_k);
    if (p.parsimonious) return sz2 * (1.0 - p.rho * p.rho) / fz_prec;
    const double fx_prec = leroux_precision(p.lambda_x, omega_k);
    const double fxz_prec = leroux_precision(p.lambda_xz, omega_k);
    const double v = sz2 / fz_prec - p.rho * p.rho * sz2 * fx_prec / (fxz_prec * fxz_prec);
    require(v >= 0.0, "negative residual spectrum: bivariate CAR parameters violate positive definiteness");
    return v;
}

PdCheck check_car_positive_definite(const BivariateCarParams& p, const Vector& eigenvalues) {
    PdCheck result;
    for (Index k = 0; k < eigenvalues.size(); ++k) {
        const double w = eigenvalues[k];
        require(w >= 0.0, "eigenvalues must be nonnegative");
        const double lhs = p.rho * p.rho * leroux_precision(p.lambda_x, w) * leroux_precision(p.lambda_z, w);
        const double rhs_root = leroux_precision(p.lambda_xz, w);
        if (!(lhs < rhs_root * rhs_root)) {
            result.ok = false;
            result.violating_omega = w;
            return result;
        }
    }
    return result;
}

Vector oracle_adjustment(const Matrix& sigma_zx, const Matrix& sigma_x, const Vector& x) {
    require(sigma_x.rows() == sigma_x.cols() && sigma_zx.rows() == sigma_zx.cols() &&
                sigma_x.rows() == sigma_zx.rows() && x.size() == sigma_x.rows(),
            "dimension mismatch");
    Eigen::LLT<Matrix> llt(sigma_x);
    if (llt.info() != Eigen::Success) throw numeric_error("Sigma_x is not positive definite");
    return sigma_zx * llt.solve(x);
}

RhoSigma rho_sigma_from_tau_eta(double tau, double eta) {
    require(tau > 0.0, "tau must be positive");
    const double inv_tau = 1.0 / tau;
    const double sigma_z2 = inv_tau + eta * eta;
    const double rho = (eta >= 0.0 ? 1.0 : -1.0) * std::sqrt(eta * eta / sigma_z2);
    return {rho, sigma_z2};
}

TauEta tau_eta_from_rho_sigma(double rho, double sigma_z2) {
    require(sigma_z2 > 0.0 && std::abs(rho) < 1.0, "need sigma_z2 > 0 and |rho| < 1");
    return {1.0 / (sigma_z2 * (1.0 - rho * rho)), rho * std::sqrt(sigma_z2)};
}

}  // namespace ecar
