#pragma once

#include <cstdint>
#include <random>

#include "ecar/types.hpp"

namespace ecar {

// Seeded RNG with in-house variate transforms. std::*_distribution output is
// implementation-defined, so normal/gamma/beta draws are generated here to keep
// the bitwise-determinism contract under our control.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Deterministic stream derivation for replicate r of a run seeded with s.
    static Rng for_replicate(std::uint64_t seed, std::uint64_t replicate) {
        // splitmix64 of (seed xor index) decorrelates consecutive indices
        std::uint64_t z = seed ^ (replicate + 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

    // uniform on (0,1); never returns 0 or 1
    double uniform() {
        const double u = (gen_() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        // Box-Muller, one value per call (no cached spare: keeps state minimal)
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    double normal(double mean, double sd) { return mean + sd * normal(); }

    Vector normal_vector(Index n) {
        Vector v(n);
        for (Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    // Marsaglia-Tsang; shape > 0, rate > 0
    double gamma(double shape, double rate) {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }

    double inverse_gamma(double shape, double scale) { return scale / gamma(shape, 1.0); }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    int poisson(double mean) {
        // inversion for small means, PTRS-style normal approx fallback not needed
        // at the sizes used here; mean stays modest in all call sites
        if (mean < 60.0) {
            const double l = std::exp(-mean);
            int k = 0;
            double p = 1.0;
            do {
                ++k;
                p *= uniform();
            } while (p > l);
            return k - 1;
        }
        // sum of two halves keeps the inversion loop short for larger means
        return poisson(mean * 0.5) + poisson(mean * 0.5);
    }

    int negative_binomial(double size, double prob) {
        // Gamma-Poisson mixture: lambda ~ Gamma(size, prob/(1-prob)), y ~ Poisson(lambda)
        const double lambda = gamma(size, prob / (1.0 - prob));
        return poisson(lambda);
    }

    std::uint64_t raw() { return gen_(); }

  private:
    std::mt19937_64 gen_;
};

}  // namespace ecar
