#pragma once

#include "ecar/types.hpp"

namespace ecar {

// B-spline basis over the frequency axis. Uniform unclamped knots chosen so
// the domain endpoints sit strictly inside the first/last basis knot interval
// and the basis is a partition of unity on all of [omega_lo, omega_hi].
// L = 1 degenerates to the single constant basis B_1 = 1 (constant-coefficient
// model).
class BSplineBasis {
  public:
    BSplineBasis() = default;
    BSplineBasis(Index L, int degree, double omega_lo, double omega_hi);

    Index size() const { return L_; }
    int degree() const { return degree_; }
    double omega_lo() const { return lo_; }
    double omega_hi() const { return hi_; }
    const Vector& knots() const { return knots_; }

    // B_l(omega), l in [0, L)
    double evaluate(Index l, double omega) const;

    // all L values at omega
    Vector evaluate_all(double omega) const;

    // rows: frequencies, cols: basis functions
    Matrix evaluate_matrix(const Vector& omegas) const;

  private:
    Index L_ = 0;
    int degree_ = 3;
    double lo_ = 0.0, hi_ = 1.0;
    Vector knots_;  // L + degree + 1 knots; empty when L = 1
};

BSplineBasis build_bspline_basis(Index L, int degree, double omega_lo, double omega_hi);

}  // namespace ecar
