#include "ecar/car.hpp"

#include <cmath>

namespace ecar {

namespace {

void check_params(const LerouxParams& params, const SpectralBasis& basis) {
    require(params.sigma2 > 0.0, "sigma2 must be positive");
    require(params.lambda >= 0.0 && params.lambda <= 1.0, "lambda must lie in [0,1]");
    if (params.lambda == 1.0) {
        for (Index k = 0; k < basis.n(); ++k)
            require(basis.omega[k] > 0.0, "lambda = 1 gives a singular precision on a zero eigenvalue");
    }
    require(params.mu.size() == 0 || params.mu.size() == basis.n(), "mu length mismatch");
}

}  // namespace

double car_log_density(const LerouxParams& params, const SpectralBasis& basis, const Vector& z) {
    check_params(params, basis);
    require(z.size() == basis.n(), "z length mismatch");
    const Index n = basis.n();
    Vector centered = params.mu.size() ? Vector(z - params.mu) : z;
    const Vector zs = basis.gamma.transpose() * centered;
    double logdet_prec = 0.0, quad = 0.0;
    for (Index k = 0; k < n; ++k) {
        const double d = leroux_precision(params.lambda, basis.omega[k]) / params.sigma2;
        logdet_prec += std::log(d);
        quad += zs[k] * zs[k] * d;
    }
    return 0.5 * (logdet_prec - quad) - 0.5 * n * std::log(2.0 * M_PI);
}

Vector car_sample(const LerouxParams& params, const SpectralBasis& basis, Rng& rng) {
    check_params(params, basis);
    const Index n = basis.n();
    Vector zs(n);
    for (Index k = 0; k < n; ++k) {
        const double var = params.sigma2 / leroux_precision(params.lambda, basis.omega[k]);
        zs[k] = rng.normal() * std::sqrt(var);
    }
    Vector z = basis.gamma * zs;
    if (params.mu.size()) z += params.mu;
    return z;
}

}  // namespace ecar
