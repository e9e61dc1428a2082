#include <cmath>
#include <limits>

#include "ecar/fit_continuous.hpp"
#include "ecar/matern.hpp"
#include "ecar/rng.hpp"

namespace ecar {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log-sigmoid box: parameter = exp(log lo + (log hi - log lo) sigmoid(t)),
// so unconstrained steps in t sweep the box on a log scale
struct LogBox {
    double log_lo, log_hi;

    LogBox(double lo, double hi) : log_lo(std::log(lo)), log_hi(std::log(hi)) {}

    double value(double t) const {
        t = std::min(std::max(t, -12.0), 12.0);
        const double s = 1.0 / (1.0 + std::exp(-t));
        return std::exp(log_lo + (log_hi - log_lo) * s);
    }
};

struct ProfilePoint {
    double loglik = kNegInf;
    double sigma2 = 0.0;
};

// profile log-likelihood of x ~ Normal(0, sigma2 R(nu, phi)) with sigma2 at
// its conditional maximum x^T R^{-1} x / n
ProfilePoint profile_loglik(const Vector& x, const Matrix& dist, double nu, double phi) {
    ProfilePoint out;
    const Index n = x.size();
    const Matrix r = matern_correlation_matrix(dist, nu, phi);
    Eigen::LLT<Matrix> llt(r);
    if (llt.info() != Eigen::Success) return out;
    const Vector w = llt.matrixL().solve(x);
    const double quad = w.squaredNorm();
    if (!std::isfinite(quad) || quad <= 0.0) return out;
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    if (!std::isfinite(logdet)) return out;
    out.sigma2 = quad / double(n);
    const double ll = -0.5 * (double(n) * (std::log(2.0 * M_PI * out.sigma2) + 1.0) + logdet);
    if (std::isfinite(ll)) out.loglik = ll;
    return out;
}

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct BfgsResult {
    Vec2 t;
    double f = kNegInf;  // maximized log-likelihood
    bool ok = false;
};

// BFGS on the negative profile log-likelihood over the transformed (nu, phi)
// coordinates; central-difference gradients, backtracking line search,
// 1e-6 relative-change convergence
BfgsResult maximize_from(const Vector& x, const Matrix& dist, const LogBox& nu_box, const LogBox& phi_box,
                         Vec2 t0) {
    const auto eval = [&](const Vec2& t) {
        return profile_loglik(x, dist, nu_box.value(t[0]), phi_box.value(t[1])).loglik;
    };

    BfgsResult res;
    res.t = t0;
    double f = eval(t0);
    if (!std::isfinite(f)) return res;

    const double h = 1e-4;
    const auto grad = [&](const Vec2& t, double ft) {
        Vec2 g;
        for (int j = 0; j < 2; ++j) {
            Vec2 tp = t, tm = t;
            tp[j] += h;
            tm[j] -= h;
            const double fp = eval(tp), fm = eval(tm);
            if (std::isfinite(fp) && std::isfinite(fm)) {
                g[j] = (fp - fm) / (2.0 * h);
            } else if (std::isfinite(fp)) {
                g[j] = (fp - ft) / h;
            } else if (std::isfinite(fm)) {
                g[j] = (ft - fm) / h;
            } else {
                g[j] = 0.0;
            }
        }
        return g;
    };

    Mat2 hinv = Mat2::Identity();
    Vec2 t = t0, g = grad(t0, f);
    for (int it = 0; it < 80; ++it) {
        Vec2 dir = hinv * g;  // ascent direction for the maximization
        if (dir.dot(g) <= 0.0) {
            hinv = Mat2::Identity();
            dir = g;
        }
        double step = 1.0;
        double f_new = kNegInf;
        Vec2 t_new;
        bool moved = false;
        for (int k = 0; k < 30; ++k) {
            t_new = t + step * dir;
            f_new = eval(t_new);
            if (std::isfinite(f_new) && f_new >= f + 1e-4 * step * dir.dot(g)) {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
        const Vec2 g_new = grad(t_new, f_new);
        const Vec2 s = t_new - t, yv = g_new - g;
        const double sy = -s.dot(yv);  // curvature of the negated objective
        if (sy > 1e-12) {
            const Mat2 eye = Mat2::Identity();
            const Mat2 v = eye - (s * (-yv).transpose()) / sy;
            hinv = v * hinv * v.transpose() + (s * s.transpose()) / sy;
        }
        const bool converged = std::abs(f_new - f) < 1e-6 * (std::abs(f_new) + 1.0);
        t = t_new;
        f = f_new;
        g = g_new;
        if (converged || g.norm() < 1e-7) break;
    }
    res.t = t;
    res.f = f;
    res.ok = std::isfinite(f);
    return res;
}

}  // namespace

MaternPluginEstimate fit_matern_mle_x(const Vector& x, const Matrix& sites) {
    require(sites.rows() == x.size(), "treatment vector and site matrix disagree on n");
    require(x.size() >= 20, "the covariance fit needs at least 20 observations");
    require(x.allFinite(), "treatment values must be finite");

    const Matrix dist = distance_matrix(sites);
    const Index n = x.size();
    double min_dist = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j)
        for (Index i = j + 1; i < n; ++i) min_dist = std::min(min_dist, dist(i, j));
    require(min_dist > 0.0, "sites must be distinct");
    const double diam = dist.maxCoeff();

    const LogBox nu_box(0.1, 5.0);
    const LogBox phi_box(1e-3, diam);

    Rng rng(0x51ab61d817a53c5bULL);  // fixed seed: the multi-start is deterministic
    MaternPluginEstimate est;
    est.loglik = kNegInf;
    const int n_starts = 5;
    est.starts = n_starts;
    for (int s = 0; s < n_starts; ++s) {
        const Vec2 t0(rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5));
        const double f0 = profile_loglik(x, dist, nu_box.value(t0[0]), phi_box.value(t0[1])).loglik;
        if (!std::isfinite(f0)) {
            ++est.failed_starts;
            continue;
        }
        const BfgsResult r = maximize_from(x, dist, nu_box, phi_box, t0);
        if (!r.ok) {
            ++est.failed_starts;
            continue;
        }
        if (r.f > est.loglik) {
            est.loglik = r.f;
            est.start_loglik = f0;
            est.nu_hat = nu_box.value(r.t[0]);
            est.phi_hat = phi_box.value(r.t[1]);
        }
    }
    if (!std::isfinite(est.loglik)) throw numeric_error("covariance optimizer failed on all starts");
    est.sigma_x2_hat = profile_loglik(x, dist, est.nu_hat, est.phi_hat).sigma2;
    return est;
}

}  // namespace ecar
