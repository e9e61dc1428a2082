#include "ecar/bspline.hpp"

#include <cmath>
#include <vector>

namespace ecar {

BSplineBasis::BSplineBasis(Index L, int degree, double omega_lo, double omega_hi) {
    require(L >= 1, "need at least one basis function");
    require(omega_lo < omega_hi, "empty frequency domain");
    L_ = L;
    lo_ = omega_lo;
    hi_ = omega_hi;
    if (L == 1) {
        degree_ = 0;
        return;
    }
    require(degree >= 0, "degree must be nonnegative");
    require(L >= degree + 1, "L must be at least degree + 1");
    degree_ = degree;
    // spacing so the domain is strictly interior to the end knot intervals
    // when room allows; at the minimum L = degree + 1 the knots hit the
    // endpoints exactly
    const Index intervals = L - degree;  // knot intervals spanning the domain
    double delta, first_interior;
    if (intervals >= 2) {
        delta = (omega_hi - omega_lo) / static_cast<double>(intervals - 1);
        first_interior = omega_lo - 0.5 * delta;
    } else {
        delta = omega_hi - omega_lo;
        first_interior = omega_lo;
    }
    const Index n_knots = L + degree + 1;
    knots_.resize(n_knots);
    for (Index j = 0; j < n_knots; ++j)
        knots_[j] = first_interior + (static_cast<double>(j) - degree) * delta;
}

double BSplineBasis::evaluate(Index l, double omega) const {
    require(l >= 0 && l < L_, "basis index out of range");
    if (L_ == 1) return 1.0;
    // Cox-de Boor; the closed right end of the domain belongs to the last span
    const auto& t = knots_;
    const int p = degree_;
    auto basis0 = [&](Index j) {
        // the end of the partition interval belongs to the last span only
        if (omega == t[L_]) return j + 1 == L_ ? 1.0 : 0.0;
        return (omega >= t[j] && omega < t[j + 1]) ? 1.0 : 0.0;
    };
    // iterative triangle over degrees
    std::vector<double> b(p + 1);
    for (int d = 0; d <= p; ++d) b[d] = basis0(l + d);
    for (int deg = 1; deg <= p; ++deg) {
        for (int d = 0; d + deg <= p; ++d) {
            const Index j = l + d;
            const double den1 = t[j + deg] - t[j];
            const double den2 = t[j + deg + 1] - t[j + 1];
            double v = 0.0;
            if (den1 > 0.0) v += (omega - t[j]) / den1 * b[d];
            if (den2 > 0.0) v += (t[j + deg + 1] - omega) / den2 * b[d + 1];
            b[d] = v;
        }
    }
    return b[0];
}

Vector BSplineBasis::evaluate_all(double omega) const {
    Vector v(L_);
    for (Index l = 0; l < L_; ++l) v[l] = evaluate(l, omega);
    return v;
}

Matrix BSplineBasis::evaluate_matrix(const Vector& omegas) const {
    Matrix m(omegas.size(), L_);
    for (Index i = 0; i < omegas.size(); ++i) m.row(i) = evaluate_all(omegas[i]).transpose();
    return m;
}

BSplineBasis build_bspline_basis(Index L, int degree, double omega_lo, double omega_hi) {
    return BSplineBasis(L, degree, omega_lo, omega_hi);
}

}  // namespace ecar
