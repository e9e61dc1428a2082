#include "ecar/matern.hpp"

#include <cmath>
#include <map>

namespace ecar {

double matern_spectral_density(const MaternSpectrum& spec, double omega_norm) {
    require(spec.nu > 0.0 && spec.phi > 0.0, "Matern parameters must be positive");
    require(omega_norm >= 0.0, "frequency norm must be nonnegative");
    const double inv_phi2 = 1.0 / (spec.phi * spec.phi);
    return spec.nu * std::pow(spec.phi, -2.0 * spec.nu) *
           std::pow(inv_phi2 + omega_norm * omega_norm, -(spec.nu + 1.0));
}

double matern_correlation(double h, double nu, double phi) {
    require(nu > 0.0 && phi > 0.0, "Matern parameters must be positive");
    require(h >= 0.0, "distance must be nonnegative");
    if (h == 0.0) return 1.0;
    const double u = h / phi;
    // K_nu(u) overflows double for large nu at small u while the correlation
    // itself approaches 1 with leading curvature u^2 / (4 (nu - 1)); switch to
    // that limit before the Bessel factor leaves the representable range
    if (u < 2.0 && std::lgamma(nu) + nu * std::log(2.0 / u) > 600.0)
        return std::max(0.0, 1.0 - u * u / (4.0 * std::max(nu - 1.0, 0.5)));
    const double v = std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(u, nu) * std::cyl_bessel_k(nu, u);
    // K_nu underflows for large u; the correlation is then numerically 0
    return std::isfinite(v) ? v : 0.0;
}

Matrix matern_correlation_matrix(const Matrix& dist, double nu, double phi) {
    std::map<double, double> cache;
    const Index n = dist.rows();
    Matrix r(n, n);
    for (Index j = 0; j < n; ++j) {
        r(j, j) = 1.0;
        for (Index i = j + 1; i < n; ++i) {
            const double h = dist(i, j);
            auto it = cache.find(h);
            const double v = (it != cache.end()) ? it->second
                                                 : cache.emplace(h, matern_correlation(h, nu, phi)).first->second;
            r(i, j) = v;
            r(j, i) = v;
        }
    }
    return r;
}

Matrix distance_matrix(const Matrix& sites) {
    require(sites.cols() == 2, "sites must be n x 2");
    const Index n = sites.rows();
    Matrix d(n, n);
    for (Index j = 0; j < n; ++j) {
        d(j, j) = 0.0;
        for (Index i = j + 1; i < n; ++i) {
            const double dx = sites(i, 0) - sites(j, 0);
            const double dy = sites(i, 1) - sites(j, 1);
            const double h = std::sqrt(dx * dx + dy * dy);
            d(i, j) = h;
            d(j, i) = h;
        }
    }
    return d;
}

}  // namespace ecar
