#include <cmath>
#include <limits>
#include <optional>

#include "ecar/fit_continuous.hpp"
#include "ecar/matern.hpp"
#include "ecar/rng.hpp"

namespace ecar {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// log |d sigmoid / dt| = log sigma (1 - sigma); -inf far out, which simply
// rejects runaway proposals
double log_sigmoid_jac(double t) {
    const double s = sigmoid(t);
    const double v = s * (1.0 - s);
    return v > 0.0 ? std::log(v) : kNegInf;
}

double sample_variance(const Vector& v) {
    const double m = v.mean();
    return (v.array() - m).square().sum() / double(std::max<Index>(v.size() - 1, 1));
}

double correlation(const Vector& a, const Vector& b) {
    const double ma = a.mean(), mb = b.mean();
    const double va = (a.array() - ma).square().sum(), vb = (b.array() - mb).square().sum();
    if (va <= 0.0 || vb <= 0.0) return 0.0;
    return ((a.array() - ma) * (b.array() - mb)).sum() / std::sqrt(va * vb);
}

// zhat proportional to x means the adjustment column cannot be separated from
// the treatment column by the data; require the adjustment to carry at least
// 1% of the treatment spread before warning so a near-zero adjustment stays
// quiet
bool nearly_collinear(const Vector& zhat, const Vector& x) {
    const double sz = std::sqrt(sample_variance(zhat)), sx = std::sqrt(sample_variance(x));
    if (!(sz > 1e-2 * sx)) return false;
    return std::abs(correlation(zhat, x)) > 0.98;
}

enum class MaternMode { standard, flexible, parsimonious };

// Transformed random-walk coordinates. The smoothness/cross-correlation
// support constraints hold by construction:
//   standard:     v = (log nu_z, log s, logit u)
//   parsimonious: v = (logit((rho_rel+1)/2), log w, log s, logit u)
//   flexible:     v = (logit((rho_rel+1)/2), logit nu_z_frac, log w, log s, logit u)
// with w the half-Cauchy excess above the plug-in nu_x, nu_z_frac the position
// of nu_z inside (0, 2 nu_xz - nu_x), rho_rel = rho nu_xz / sqrt(nu_x nu_z) in
// (-1, 1), s the summed variance with the exponential prior, and u the
// uniform signal ratio.
struct SpatialParams {
    double rho = 0.0, nu_z = 0.0, nu_xz = 0.0, sigma_z2 = 0.0, sigma2 = 0.0;
    bool valid = false;
};

Index block_dim(MaternMode mode) {
    switch (mode) {
        case MaternMode::standard: return 3;
        case MaternMode::parsimonious: return 4;
        default: return 5;
    }
}

SpatialParams decode(MaternMode mode, const Vector& v, double nu_x, double nu_max) {
    SpatialParams p;
    double s = 0.0, u = 0.0;
    switch (mode) {
        case MaternMode::standard: {
            p.nu_z = std::exp(v[0]);
            s = std::exp(v[1]);
            u = sigmoid(v[2]);
            p.sigma_z2 = s * u;
            break;
        }
        case MaternMode::parsimonious: {
            const double w = std::exp(v[1]);
            p.nu_z = nu_x + w;
            p.nu_xz = 0.5 * (nu_x + p.nu_z);
            p.rho = std::sqrt(nu_x * p.nu_z) / p.nu_xz * (2.0 * sigmoid(v[0]) - 1.0);
            s = std::exp(v[2]);
            u = sigmoid(v[3]);
            p.sigma_z2 = s * u / (1.0 - p.rho * p.rho);
            break;
        }
        case MaternMode::flexible: {
            const double w = std::exp(v[2]);
            p.nu_xz = nu_x + w;
            p.nu_z = sigmoid(v[1]) * (nu_x + 2.0 * w);
            p.rho = std::sqrt(nu_x * p.nu_z) / p.nu_xz * (2.0 * sigmoid(v[0]) - 1.0);
            s = std::exp(v[3]);
            u = sigmoid(v[4]);
            p.sigma_z2 = s * u;
            break;
        }
    }
    p.sigma2 = s * (1.0 - u);
    p.valid = std::isfinite(p.nu_z) && p.nu_z > 0.0 && p.nu_z <= nu_max &&
              (mode == MaternMode::standard || (std::isfinite(p.nu_xz) && p.nu_xz <= nu_max)) &&
              std::isfinite(p.sigma_z2) && std::isfinite(p.sigma2) && p.sigma2 > 0.0 && p.sigma_z2 > 0.0;
    return p;
}

// variable part of the log prior in the transformed coordinates (transform
// Jacobians folded in); constants cancel in the acceptance ratio
double log_prior(MaternMode mode, const Vector& v, const ContinuousPriorConfig& prior) {
    const double c = prior.nu_scale;
    const auto half_cauchy_log = [c](double w, double log_w) {
        return -std::log1p((w / c) * (w / c)) + log_w;
    };
    double lp = 0.0;
    switch (mode) {
        case MaternMode::standard:
            lp += half_cauchy_log(std::exp(v[0]), v[0]);
            lp += -prior.total_variance_rate * std::exp(v[1]) + v[1];
            lp += log_sigmoid_jac(v[2]);
            break;
        case MaternMode::parsimonious:
            lp += log_sigmoid_jac(v[0]);
            lp += half_cauchy_log(std::exp(v[1]), v[1]);
            lp += -prior.total_variance_rate * std::exp(v[2]) + v[2];
            lp += log_sigmoid_jac(v[3]);
            break;
        case MaternMode::flexible:
            lp += log_sigmoid_jac(v[0]);
            lp += log_sigmoid_jac(v[1]);
            lp += half_cauchy_log(std::exp(v[2]), v[2]);
            lp += -prior.total_variance_rate * std::exp(v[3]) + v[3];
            lp += log_sigmoid_jac(v[4]);
            break;
    }
    return lp;
}

struct ParametricCaches {
    Matrix dist;
    double phi = 0.0;
    double inv_sigma_x = 1.0;
    Eigen::LLT<Matrix> llt_x;  // factor of the plug-in treatment correlation
    Vector ax;                 // Rx_hat^{-1} x
    Matrix design;             // [1, x]
    Vector y;
};

struct LikState {
    Eigen::LLT<Matrix> llt;
    Matrix dtil;   // whitened design
    Vector rtil;   // whitened residual of the adjustment
    Vector adjustment;
    double logdet_sigma = 0.0;
    double marg_loglik = kNegInf;  // beta_0, beta_x integrated out
};

// Cov(delta) = sigma_z^2 (R_z - rho^2 R_zx Rx^{-1} R_zx) + sigma^2 I and the
// conditional-mean term rho sigma_z / sigma_x_hat R_zx Rx_hat^{-1} x; the
// coefficient pair is integrated out analytically for the block update
std::optional<LikState> build_lik(MaternMode mode, const SpatialParams& p, const ParametricCaches& c,
                                  double beta_variance) {
    const Index n = c.y.size();
    LikState lik;
    Matrix sigma;
    lik.adjustment = Vector::Zero(n);
    if (mode == MaternMode::standard || p.rho == 0.0) {
        sigma = p.sigma_z2 * matern_correlation_matrix(c.dist, p.nu_z, c.phi);
        if (mode != MaternMode::standard) {
            const Matrix rzx = matern_correlation_matrix(c.dist, p.nu_xz, c.phi);
            lik.adjustment = (p.rho * std::sqrt(p.sigma_z2) * c.inv_sigma_x) * (rzx * c.ax);
        }
    } else {
        const Matrix rz = matern_correlation_matrix(c.dist, p.nu_z, c.phi);
        const Matrix rzx = matern_correlation_matrix(c.dist, p.nu_xz, c.phi);
        const Matrix s = c.llt_x.matrixL().solve(rzx);  // Lx^{-1} R_zx
        sigma = p.sigma_z2 * rz;
        sigma.selfadjointView<Eigen::Lower>().rankUpdate(s.transpose(), -p.sigma_z2 * p.rho * p.rho);
        lik.adjustment = (p.rho * std::sqrt(p.sigma_z2) * c.inv_sigma_x) * (rzx * c.ax);
    }
    sigma.diagonal().array() += p.sigma2;
    lik.llt.compute(sigma);
    if (lik.llt.info() != Eigen::Success) return std::nullopt;
    lik.logdet_sigma = 2.0 * lik.llt.matrixLLT().diagonal().array().log().sum();
    if (!std::isfinite(lik.logdet_sigma)) return std::nullopt;

    lik.dtil = lik.llt.matrixL().solve(c.design);
    lik.rtil = lik.llt.matrixL().solve((c.y - lik.adjustment).eval());
    Eigen::Matrix2d m = Eigen::Matrix2d::Identity() + beta_variance * (lik.dtil.transpose() * lik.dtil);
    const Eigen::Vector2d a = lik.dtil.transpose() * lik.rtil;
    const double det_m = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    if (!(det_m > 0.0)) return std::nullopt;
    const double quad = lik.rtil.squaredNorm() - beta_variance * a.dot(m.inverse() * a);
    lik.marg_loglik =
        -0.5 * (double(n) * std::log(2.0 * M_PI) + lik.logdet_sigma + std::log(det_m) + quad);
    if (!std::isfinite(lik.marg_loglik)) return std::nullopt;
    return lik;
}

void check_common(const Vector& y, const Vector& x, const Matrix& sites, const MaternPluginEstimate& plugin,
                  const ContinuousPriorConfig& prior, const McmcConfig& mcmc) {
    mcmc.validate();
    require(sites.cols() == 2, "sites must be n x 2");
    require(y.size() == x.size() && y.size() == sites.rows(), "y, x and sites disagree on n");
    require(y.size() >= 10, "continuous fits need at least 10 observations");
    require(y.allFinite() && x.allFinite(), "data must be finite");
    require(plugin.phi_hat > 0.0 && plugin.nu_hat > 0.0 && plugin.sigma_x2_hat > 0.0,
            "plug-in estimates must be positive");
    require(prior.beta_variance > 0.0 && prior.total_variance_rate > 0.0 && prior.nu_scale > 0.0,
            "prior scales must be positive");
    require(prior.nu_max > plugin.nu_hat, "the smoothness cap must exceed the plug-in nu");
}

ContinuousFit run_parametric(MaternMode mode, const char* tag, const Vector& y, const Vector& x,
                             const Matrix& sites, const MaternPluginEstimate& plugin,
                             const ContinuousPriorConfig& prior, const McmcConfig& mcmc) {
    check_common(y, x, sites, plugin, prior, mcmc);
    const Index n = y.size();
    const bool prior_only = prior.prior_only;

    ParametricCaches caches;
    caches.phi = plugin.phi_hat;
    caches.inv_sigma_x = 1.0 / std::sqrt(plugin.sigma_x2_hat);
    caches.design = Matrix(n, 2);
    caches.design.col(0).setOnes();
    caches.design.col(1) = x;
    caches.y = y;
    if (!prior_only) {
        caches.dist = distance_matrix(sites);
        if (mode != MaternMode::standard) {
            const Matrix rx = matern_correlation_matrix(caches.dist, plugin.nu_hat, plugin.phi_hat);
            caches.llt_x.compute(rx);
            if (caches.llt_x.info() != Eigen::Success)
                throw numeric_error("treatment correlation is not positive definite at the plug-in");
            caches.ax = caches.llt_x.solve(x);
        }
    }

    const Index dim = block_dim(mode);
    Vector v = Vector::Zero(dim);
    const double s0 = prior_only ? 1.0 : std::max(sample_variance(y), 1e-6);
    switch (mode) {
        case MaternMode::standard:
            v[0] = std::log(std::max(0.5, plugin.nu_hat));
            v[1] = std::log(s0);
            break;
        case MaternMode::parsimonious:
            v[1] = std::log(0.5);
            v[2] = std::log(s0);
            break;
        case MaternMode::flexible:
            v[2] = std::log(0.5);
            v[3] = std::log(s0);
            break;
    }

    SpatialParams params = decode(mode, v, plugin.nu_hat, prior.nu_max);
    require(params.valid, "initial covariance state is invalid; check nu_max against the plug-in");
    LikState lik;
    if (!prior_only) {
        auto built = build_lik(mode, params, caches, prior.beta_variance);
        if (!built) throw numeric_error("initial covariance factorization failed");
        lik = std::move(*built);
    } else {
        lik.adjustment = Vector::Zero(n);
        lik.marg_loglik = 0.0;
    }
    double lp = log_prior(mode, v, prior);

    Rng rng(mcmc.seed);
    AdaptiveScale block_scale(0.2);
    const Index retained = mcmc.retained();
    const bool has_rho = mode != MaternMode::standard;
    std::vector<std::string> names = has_rho
        ? std::vector<std::string>{"beta0", "beta_x", "rho", "nu_z", "nu_xz", "sigma_z2", "sigma2"}
        : std::vector<std::string>{"beta0", "beta_x", "nu_z", "sigma_z2", "sigma2"};
    Matrix draws(retained, Index(names.size()));
    Vector devs = Vector::Constant(retained, kNaN);
    Vector zhat = Vector::Zero(n);

    // coordinate positions of the cross-correlation and smoothness-excess
    // walks, for the prior-refresh move below
    const Index w_coord = mode == MaternMode::parsimonious ? 1 : 2;
    const double w_cap = prior.nu_max - plugin.nu_hat;

    for (Index it = 0; it < mcmc.iterations; ++it) {
        const bool adapting = it < mcmc.burn_in;

        // Two move flavors. The random walk adapts its scale; the refresh
        // redraws (rho_rel, w) from their priors, which factorize exactly in
        // these coordinates, so its acceptance ratio is the bare marginal
        // likelihood ratio. The refresh lets rho escape the region where a
        // large smoothness excess has pinched its valid range to near zero.
        const bool refresh = has_rho && rng.uniform() < 0.2;
        Vector vp = v;
        if (refresh) {
            const double u01 = std::min(std::max(rng.uniform(), 1e-12), 1.0 - 1e-12);
            vp[0] = std::log(u01 / (1.0 - u01));
            double w = 0.0;
            do {
                w = prior.nu_scale * std::tan(0.5 * M_PI * rng.uniform());
            } while (!(w > 0.0) || !(w < w_cap));
            vp[w_coord] = std::log(w);
        } else {
            for (Index d = 0; d < dim; ++d) vp[d] += block_scale.scale() * rng.normal();
        }
        bool accepted = false;
        const SpatialParams cand = decode(mode, vp, plugin.nu_hat, prior.nu_max);
        if (cand.valid) {
            const double lp_cand = log_prior(mode, vp, prior);
            if (std::isfinite(lp_cand)) {
                const double prior_part = refresh ? 0.0 : lp_cand - lp;
                if (prior_only) {
                    if (std::log(rng.uniform()) < prior_part) {
                        v = vp;
                        params = cand;
                        lp = lp_cand;
                        accepted = true;
                    }
                } else if (auto built = build_lik(mode, cand, caches, prior.beta_variance)) {
                    const double ratio = built->marg_loglik - lik.marg_loglik + prior_part;
                    if (std::log(rng.uniform()) < ratio) {
                        v = vp;
                        params = cand;
                        lp = lp_cand;
                        lik = std::move(*built);
                        accepted = true;
                    }
                }
            }
        }
        if (!refresh) block_scale.observe(accepted, adapting);

        // coefficients from their exact conditional given the accepted block
        Eigen::Vector2d beta;
        if (prior_only) {
            beta[0] = rng.normal(0.0, std::sqrt(prior.beta_variance));
            beta[1] = rng.normal(0.0, std::sqrt(prior.beta_variance));
        } else {
            Eigen::Matrix2d q = lik.dtil.transpose() * lik.dtil;
            q.diagonal().array() += 1.0 / prior.beta_variance;
            Eigen::LLT<Eigen::Matrix2d> llt_q(q);
            if (llt_q.info() != Eigen::Success) throw numeric_error("coefficient update failed");
            const Eigen::Vector2d mean = llt_q.solve(lik.dtil.transpose() * lik.rtil);
            Eigen::Vector2d z(rng.normal(), rng.normal());
            beta = mean + llt_q.matrixU().solve(z);
        }

        if (it >= mcmc.burn_in) {
            const Index r = it - mcmc.burn_in;
            Index c = 0;
            draws(r, c++) = beta[0];
            draws(r, c++) = beta[1];
            if (has_rho) draws(r, c++) = params.rho;
            draws(r, c++) = params.nu_z;
            if (has_rho) draws(r, c++) = params.nu_xz;
            draws(r, c++) = params.sigma_z2;
            draws(r, c++) = params.sigma2;
            if (!prior_only) {
                const Vector resid = lik.rtil - lik.dtil * beta;
                devs[r] = double(n) * std::log(2.0 * M_PI) + lik.logdet_sigma + resid.squaredNorm();
                zhat += lik.adjustment;
            }
        }
    }

    PosteriorSamples samples;
    samples.draws = std::move(draws);
    samples.names = names;
    samples.iterations = mcmc.iterations;
    samples.burn_in = mcmc.burn_in;
    samples.seed = mcmc.seed;
    samples.deviance_draws = devs;

    if (!prior_only) {
        zhat /= double(retained);
        const Vector means = samples.draws.colwise().mean();
        SpatialParams pm;
        Index c = 2;
        if (has_rho) pm.rho = means[c++];
        pm.nu_z = means[c++];
        if (has_rho) pm.nu_xz = means[c++];
        pm.sigma_z2 = means[c++];
        pm.sigma2 = means[c++];
        pm.valid = true;
        if (auto built = build_lik(mode, pm, caches, prior.beta_variance)) {
            const Vector resid = built->rtil - built->dtil * Eigen::Vector2d(means[0], means[1]);
            samples.deviance_at_mean =
                double(n) * std::log(2.0 * M_PI) + built->logdet_sigma + resid.squaredNorm();
        }
    }

    ContinuousFit fit;
    fit.samples = std::move(samples);
    fit.zhat = std::move(zhat);
    fit.tag = tag;
    fit.collinear_adjustment = !prior_only && nearly_collinear(fit.zhat, x);
    return fit;
}

}  // namespace

ContinuousFit fit_standard_matern(const Vector& y, const Vector& x, const Matrix& sites,
                                  const MaternPluginEstimate& plugin, const ContinuousPriorConfig& prior,
                                  const McmcConfig& mcmc) {
    return run_parametric(MaternMode::standard, "standard", y, x, sites, plugin, prior, mcmc);
}

ContinuousFit fit_flexible_matern(const Vector& y, const Vector& x, const Matrix& sites,
                                  const MaternPluginEstimate& plugin, const ContinuousPriorConfig& prior,
                                  const McmcConfig& mcmc) {
    return run_parametric(MaternMode::flexible, "flexible", y, x, sites, plugin, prior, mcmc);
}

ContinuousFit fit_parsimonious_matern(const Vector& y, const Vector& x, const Matrix& sites,
                                      const MaternPluginEstimate& plugin, const ContinuousPriorConfig& prior,
                                      const McmcConfig& mcmc) {
    return run_parametric(MaternMode::parsimonious, "parsimonious", y, x, sites, plugin, prior, mcmc);
}

ContinuousFit fit_semiparametric_continuous(const Vector& y, const Vector& x, const Matrix& sites,
                                            const ConstructedCovariates& covs, const MaternPluginEstimate& plugin,
                                            const ContinuousPriorConfig& prior, const McmcConfig& mcmc) {
    check_common(y, x, sites, plugin, prior, mcmc);
    require(!prior.prior_only, "prior-only runs are not supported for the semiparametric fit");
    require(covs.provenance == CovProvenance::continuous, "constructed covariates must come from the kernel smooths");
    require(covs.columns.rows() == y.size(), "constructed covariates disagree with the data on n");
    const Index n = y.size();
    const Index L = covs.columns.cols();
    const Index p = L + 2;

    // one-time eigendecomposition of the plug-in Matern correlation turns the
    // marginal likelihood into n independent terms
    const Matrix dist = distance_matrix(sites);
    const Matrix r_delta = matern_correlation_matrix(dist, plugin.nu_hat, plugin.phi_hat);
    Eigen::SelfAdjointEigenSolver<Matrix> es(r_delta);
    if (es.info() != Eigen::Success) throw numeric_error("eigendecomposition of the spatial correlation failed");
    const Vector lambda = es.eigenvalues().cwiseMax(0.0);
    Matrix design(n, p);
    design.col(0).setOnes();
    design.col(1) = x;
    design.rightCols(L) = covs.columns;
    const Vector ytil = es.eigenvectors().transpose() * y;
    const Matrix dtil = es.eigenvectors().transpose() * design;

    // coefficient prior precision: Normal for beta_0, beta_x; random-walk
    // structure over b (plus the optional proper anchor on b_1)
    Matrix p0 = Matrix::Zero(p, p);
    p0(0, 0) = p0(1, 1) = 1.0 / prior.beta_variance;
    const bool has_sigma_b = L >= 2;
    const Matrix iar = has_sigma_b ? iar_structure_matrix(L) : Matrix();
    if (!has_sigma_b) p0(2, 2) = 1.0 / prior.beta_variance;
    const double anchor_prec =
        std::isfinite(prior.b1_anchor_variance) ? 1.0 / prior.b1_anchor_variance : 0.0;

    double sigma_b = 0.5;
    Vector v(2);
    v[0] = std::log(std::max(sample_variance(y), 1e-6));
    v[1] = 0.0;

    struct Collapsed {
        double loglik = kNegInf;
        Eigen::LLT<Matrix> llt_q;
        Vector mean;
        Vector variances;
    };
    const auto collapse = [&](const Vector& vv, double sb) -> Collapsed {
        Collapsed out;
        const double s = std::exp(vv[0]), u = sigmoid(vv[1]);
        const double sigma_z2 = s * u, sigma2 = s * (1.0 - u);
        if (!(sigma2 > 0.0) || !std::isfinite(sigma_z2)) return out;
        out.variances = (sigma_z2 * lambda.array() + sigma2).matrix();
        const Vector w = out.variances.cwiseInverse();
        Matrix q = dtil.transpose() * w.asDiagonal() * dtil + p0;
        if (has_sigma_b) q.bottomRightCorner(L, L) += iar / (sigma_b * sigma_b);
        if (has_sigma_b && anchor_prec > 0.0) q(2, 2) += anchor_prec;
        out.llt_q.compute(q);
        if (out.llt_q.info() != Eigen::Success) return out;
        const Vector rhs = dtil.transpose() * (ytil.array() * w.array()).matrix();
        out.mean = out.llt_q.solve(rhs);
        const double logdet_q = 2.0 * out.llt_q.matrixLLT().diagonal().array().log().sum();
        const double ll = -0.5 * out.variances.array().log().sum() -
                          0.5 * (ytil.array().square() * w.array()).sum() - 0.5 * logdet_q +
                          0.5 * out.mean.dot(rhs);
        if (std::isfinite(ll)) out.loglik = ll;
        return out;
    };
    const auto scale_prior = [&](const Vector& vv) {
        return -prior.total_variance_rate * std::exp(vv[0]) + vv[0] + log_sigmoid_jac(vv[1]);
    };

    Rng rng(mcmc.seed);
    AdaptiveScale scale_walk(0.3), sigma_b_walk(0.5);
    const Index retained = mcmc.retained();
    std::vector<std::string> names{"beta0", "beta_x"};
    for (Index l = 1; l <= L; ++l) names.push_back("b_" + std::to_string(l));
    names.push_back("sigma_z2");
    names.push_back("sigma2");
    if (has_sigma_b) names.push_back("sigma_b2");
    Matrix draws(retained, Index(names.size()));
    Vector devs(retained);
    Vector zhat = Vector::Zero(n);
    Vector theta = Vector::Zero(p);

    Collapsed cur = collapse(v, sigma_b);
    if (!std::isfinite(cur.loglik)) throw numeric_error("initial covariance state failed to factorize");

    for (Index it = 0; it < mcmc.iterations; ++it) {
        const bool adapting = it < mcmc.burn_in;

        // (s, u) block with the coefficients integrated out
        Vector vp = v;
        vp[0] += scale_walk.scale() * rng.normal();
        vp[1] += scale_walk.scale() * rng.normal();
        Collapsed cand = collapse(vp, sigma_b);
        bool accepted = false;
        if (std::isfinite(cand.loglik)) {
            const double ratio = cand.loglik + scale_prior(vp) - cur.loglik - scale_prior(v);
            if (std::log(rng.uniform()) < ratio) {
                v = vp;
                cur = std::move(cand);
                accepted = true;
            }
        }
        scale_walk.observe(accepted, adapting);

        // coefficients from their exact conditional
        Vector z(p);
        for (Index j = 0; j < p; ++j) z[j] = rng.normal();
        theta = cur.mean + cur.llt_q.matrixU().solve(z);

        // spline-coefficient scale given the fresh coefficients
        if (has_sigma_b) {
            const Vector b = theta.segment(2, L);
            const double b_quad = b.dot(iar * b);
            const double cand_log = std::log(sigma_b) + sigma_b_walk.scale() * rng.normal();
            const double sb_cand = std::exp(cand_log);
            double ratio = -prior.pcp_rate * (sb_cand - sigma_b) -
                           double(L - 1) * (cand_log - std::log(sigma_b)) -
                           0.5 * b_quad * (1.0 / (sb_cand * sb_cand) - 1.0 / (sigma_b * sigma_b)) +
                           (cand_log - std::log(sigma_b));
            const bool acc = std::log(rng.uniform()) < ratio;
            if (acc) {
                sigma_b = sb_cand;
                cur = collapse(v, sigma_b);  // the coefficient precision moved
                if (!std::isfinite(cur.loglik)) throw numeric_error("covariance state failed to refactorize");
            }
            sigma_b_walk.observe(acc, adapting);
        }

        if (it >= mcmc.burn_in) {
            const Index r = it - mcmc.burn_in;
            const double s = std::exp(v[0]), u = sigmoid(v[1]);
            Index c = 0;
            draws(r, c++) = theta[0];
            draws(r, c++) = theta[1];
            for (Index l = 0; l < L; ++l) draws(r, c++) = theta[2 + l];
            draws(r, c++) = s * u;
            draws(r, c++) = s * (1.0 - u);
            if (has_sigma_b) draws(r, c++) = sigma_b * sigma_b;
            const Vector resid = ytil - dtil * theta;
            devs[r] = double(n) * std::log(2.0 * M_PI) + cur.variances.array().log().sum() +
                      (resid.array().square() / cur.variances.array()).sum();
            zhat += covs.columns * theta.segment(2, L);
        }
    }

    PosteriorSamples samples;
    samples.draws = std::move(draws);
    samples.names = names;
    samples.iterations = mcmc.iterations;
    samples.burn_in = mcmc.burn_in;
    samples.seed = mcmc.seed;
    samples.deviance_draws = devs;

    zhat /= double(retained);
    const Vector means = samples.draws.colwise().mean();
    Vector theta_mean = means.head(p);
    const double sz2_m = means[p], s2_m = means[p + 1];
    const Vector vm = (sz2_m * lambda.array() + s2_m).matrix();
    const Vector resid_m = ytil - dtil * theta_mean;
    samples.deviance_at_mean = double(n) * std::log(2.0 * M_PI) + vm.array().log().sum() +
                               (resid_m.array().square() / vm.array()).sum();

    ContinuousFit fit;
    fit.samples = std::move(samples);
    fit.zhat = std::move(zhat);
    fit.tag = "semiparametric";
    fit.collinear_adjustment = nearly_collinear(fit.zhat, x);
    return fit;
}

}  // namespace ecar
