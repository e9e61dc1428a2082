#pragma once

namespace ecar {

// Bessel function of the first kind J_kappa(x), x >= 0. kappa = d/2 - 1 = 0 in
// the planar setting used throughout; the zero-order path is implemented
// in-project (power series below the switch point, Hankel asymptotic beyond)
// and holds ~1e-11 relative accuracy away from zeros for x up to 1e3.
double bessel_j(double kappa, double x);

double bessel_j0(double x);

}  // namespace ecar
