#include "ecar/bessel.hpp"

#include <cmath>
#include <stdexcept>

namespace ecar {

namespace {

// Power series sum_m (-1)^m (x/2)^{2m} / (m!)^2. Cancellation stays below
// ~5e4 * eps for x <= 13, keeping the result good to ~5e-12 relative.
double j0_series(double x) {
    const double q = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int m = 1; m < 120; ++m) {
        term *= -q / (static_cast<double>(m) * m);
        sum += term;
        if (std::abs(term) < 1e-18 * (std::abs(sum) + 1e-300)) break;
    }
    return sum;
}

// Hankel expansion (DLMF 10.17.3 with nu = 0):
//   J0(x) = sqrt(2/(pi x)) [cos(w) P(x) - sin(w) Q(x)],  w = x - pi/4,
// with P, Q the even/odd asymptotic sums. Optimal truncation error ~e^{-2x},
// below 5e-12 for x >= 13.
double j0_asymptotic(double x) {
    double a = 1.0;  // a_k / x^k, signed via the recurrence
    double p = 1.0, q = 0.0;
    double prev = 1.0;
    for (int k = 1; k < 40; ++k) {
        const double tm = 2.0 * k - 1.0;
        a *= -(tm * tm) / (8.0 * k * x);
        if (std::abs(a) >= prev) break;  // asymptotic tail started growing
        prev = std::abs(a);
        const int r = k % 4;
        // (-1)^{k/2} over even k and (-1)^{(k-1)/2} over odd k
        if (r == 0) p += a;
        else if (r == 1) q += a;
        else if (r == 2) p -= a;
        else q -= a;
        if (prev < 1e-17) break;
    }
    const double w = x - 0.25 * M_PI;
    return std::sqrt(2.0 / (M_PI * x)) * (std::cos(w) * p - std::sin(w) * q);
}

}  // namespace

double bessel_j0(double x) {
    if (x < 0.0) throw std::invalid_argument("bessel_j0: negative argument");
    return (x < 13.0) ? j0_series(x) : j0_asymptotic(x);
}

double bessel_j(double kappa, double x) {
    if (kappa < 0.0) throw std::invalid_argument("bessel_j: negative order");
    if (x < 0.0) throw std::invalid_argument("bessel_j: negative argument");
    if (kappa == 0.0) return bessel_j0(x);
    return std::cyl_bessel_j(kappa, x);
}

}  // namespace ecar
