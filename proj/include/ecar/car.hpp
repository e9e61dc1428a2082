#pragma once

#include "ecar/rng.hpp"
#include "ecar/spectral_basis.hpp"
#include "ecar/types.hpp"

namespace ecar {

// Leroux CAR: z ~ Normal(mu, sigma2 [(1-lambda) I + lambda R]^{-1}).
struct LerouxParams {
    double sigma2 = 1.0;
    double lambda = 0.0;  // in [0,1); 1 is singular on a connected graph
    Vector mu;
};

// spectral precision factor 1 - lambda + lambda * omega
inline double leroux_precision(double lambda, double omega) { return 1.0 - lambda + lambda * omega; }

// log density evaluated in the spectral domain (O(n) after one Gamma^T multiply)
double car_log_density(const LerouxParams& params, const SpectralBasis& basis, const Vector& z);

// exact draw via independent spectral coordinates
Vector car_sample(const LerouxParams& params, const SpectralBasis& basis, Rng& rng);

}  // namespace ecar
