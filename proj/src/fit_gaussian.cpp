#include <cmath>

#include "ecar/car.hpp"
#include "ecar/fit_discrete.hpp"
#include "ecar/rng.hpp"

namespace ecar {

GaussianSpectralData make_spectral_data(const SpectralBasis& basis, const Vector& y, const Vector& x) {
    require(y.size() == basis.n() && x.size() == basis.n(), "data size does not match basis");
    GaussianSpectralData d;
    d.y_star = graph_fourier(basis, y);
    d.x_star = graph_fourier(basis, x);
    d.col_sums = basis.col_sums;
    d.omega = basis.omega;
    return d;
}

PriorConfig PriorConfig::standard_gaussian() {
    PriorConfig p;
    p.variant = PriorVariant::standard;
    return p;
}

PriorConfig PriorConfig::parsimonious_car() {
    PriorConfig p;
    p.variant = PriorVariant::parametric;
    return p;
}

PriorConfig PriorConfig::semiparametric(bool r2d2) {
    PriorConfig p;
    p.variant = r2d2 ? PriorVariant::semi_r2d2 : PriorVariant::semi_pcp;
    return p;
}

namespace {

using Array = Eigen::ArrayXd;

// draw from Normal(Q^{-1} rhs, Q^{-1})
Vector draw_gaussian_block(const Matrix& Q, const Vector& rhs, Rng& rng) {
    Eigen::LLT<Matrix> llt(Q);
    if (llt.info() != Eigen::Success) throw numeric_error("coefficient block precision not positive definite");
    Vector mean = llt.solve(rhs);
    Vector z = rng.normal_vector(Q.rows());
    return mean + llt.matrixU().solve(z);
}

Array leroux_spectrum(double lambda, const Vector& omega) {
    return 1.0 / (1.0 - lambda + lambda * omega.array());
}

double gaussian_deviance(const Array& resid, const Array& v) {
    return (v.log() + resid.square() / v).sum() + double(resid.size()) * std::log(2.0 * M_PI);
}

void check_finite(double log_post, Index iteration) {
    if (!std::isfinite(log_post))
        throw numeric_error("non-finite log posterior at iteration " + std::to_string(iteration));
}

}  // namespace

PosteriorSamples fit_standard_gaussian(const GaussianSpectralData& data, const PriorConfig& prior,
                                       const McmcConfig& mcmc) {
    const Index n = data.n();
    require(n >= 3, "need at least 3 regions");
    mcmc.validate();
    Rng rng(mcmc.seed);

    const Array y = data.y_star.array(), x = data.x_star.array(), m = data.col_sums.array();
    Matrix design(n, 2);
    design.col(0) = data.col_sums;
    design.col(1) = data.x_star;

    // state
    Vector beta = Vector::Zero(2);
    double tau2 = mcmc.init_or(
        "tau2", std::max(1e-8, (y - y.mean()).square().sum() / double(n - 1)));
    double r = mcmc.init_or("r", 0.5), lambda_z = mcmc.init_or("lambda_z", 0.5);
    AdaptiveScale r_scale(0.1), lz_scale(0.1);

    auto unit_variance = [&](double rr, double lz) -> Array {
        return rr * leroux_spectrum(lz, data.omega) + (1.0 - rr);
    };
    Array u = unit_variance(r, lambda_z);

    PosteriorSamples out;
    out.names = {"beta0", "beta_x", "tau2", "r", "lambda_z", "sigma_z2", "sigma2"};
    out.draws.resize(mcmc.retained(), Index(out.names.size()));
    out.deviance_draws.resize(mcmc.retained());
    out.iterations = mcmc.iterations;
    out.burn_in = mcmc.burn_in;
    out.seed = mcmc.seed;

    for (Index it = 0; it < mcmc.iterations; ++it) {
        const bool adapting = it < mcmc.burn_in;
        Array v = tau2 * u;

        // coefficient block
        Matrix wd = (design.array().colwise() / v).matrix();
        Matrix q = wd.transpose() * design;
        q.diagonal().array() += 1.0 / prior.beta_variance;
        beta = draw_gaussian_block(q, wd.transpose() * data.y_star, rng);

        Array resid = y - beta[0] * m - beta[1] * x;

        // total variance, conjugate
        tau2 = rng.inverse_gamma(prior.tau2_shape + 0.5 * double(n),
                                 prior.tau2_rate + 0.5 * (resid.square() / u).sum());
        v = tau2 * u;

        // spatial proportion r
        {
            const double cand = r + r_scale.scale() * rng.normal();
            bool accepted = false;
            if (cand > 0.0 && cand < 1.0) {
                Array u2 = unit_variance(cand, lambda_z);
                Array v2 = tau2 * u2;
                const double lp = -0.5 * ((v2.log() + resid.square() / v2).sum() -
                                          (v.log() + resid.square() / v).sum());
                check_finite(lp, it);
                if (std::log(rng.uniform()) < lp) {
                    r = cand;
                    u = u2;
                    v = v2;
                    accepted = true;
                }
            }
            r_scale.observe(accepted, adapting);
        }

        // spatial dependence lambda_z
        {
            const double cand = lambda_z + lz_scale.scale() * rng.normal();
            bool accepted = false;
            if (cand > 0.0 && cand < 1.0) {
                Array u2 = unit_variance(r, cand);
                Array v2 = tau2 * u2;
                const double lp = -0.5 * ((v2.log() + resid.square() / v2).sum() -
                                          (v.log() + resid.square() / v).sum());
                check_finite(lp, it);
                if (std::log(rng.uniform()) < lp) {
                    lambda_z = cand;
                    u = u2;
                    v = v2;
                    accepted = true;
                }
            }
            lz_scale.observe(accepted, adapting);
        }

        if (it >= mcmc.burn_in) {
            const Index row = it - mcmc.burn_in;
            out.draws(row, 0) = beta[0];
            out.draws(row, 1) = beta[1];
            out.draws(row, 2) = tau2;
            out.draws(row, 3) = r;
            out.draws(row, 4) = lambda_z;
            out.draws(row, 5) = tau2 * r;
            out.draws(row, 6) = tau2 * (1.0 - r);
            out.deviance_draws[row] = gaussian_deviance(resid, v);
        }
    }

    // deviance at the posterior mean
    Vector pm = out.draws.colwise().mean();
    Array u_pm = unit_variance(pm[3], pm[4]);
    Array resid_pm = y - pm[0] * m - pm[1] * x;
    out.deviance_at_mean = gaussian_deviance(resid_pm, pm[2] * u_pm);
    return out;
}

PosteriorSamples fit_parsimonious_car(const GaussianSpectralData& data, const PriorConfig& prior,
                                      const McmcConfig& mcmc) {
    const Index n = data.n();
    require(n >= 5, "need at least 5 regions");
    mcmc.validate();
    Rng rng(mcmc.seed);

    const Array y = data.y_star.array(), x = data.x_star.array(), m = data.col_sums.array();

    // state: coefficient block (beta0, beta_x, psi), variances, dependence
    Vector beta = Vector::Zero(3);
    const double y_var = std::max(1e-8, (y - y.mean()).square().sum() / double(n - 1));
    double tau = mcmc.init_or("tau", 0.5 * y_var);      // sigma_z^2 (1-rho^2)
    double sigma2 = mcmc.init_or("sigma2", 0.5 * y_var); // nugget
    double sigma_x2 =
        mcmc.init_or("sigma_x2", std::max(1e-8, x.square().sum() / double(n)));
    double lambda_x = mcmc.init_or("lambda_x", 0.25);
    double lambda_z = mcmc.init_or("lambda_z", 0.5);
    AdaptiveScale tau_scale(0.5), s2_scale(0.5), lx_scale(0.1), lz_scale(0.1);

    // spectral shapes
    auto prec_of = [&](double lambda) -> Array { return 1.0 - lambda + lambda * data.omega.array(); };
    Array prec_x = prec_of(lambda_x), prec_z = prec_of(lambda_z);
    // adjustment profile alpha_k / psi
    auto ratio_of = [&](const Array& px, const Array& pz) -> Array { return (px / pz).sqrt(); };
    Array s = ratio_of(prec_x, prec_z);

    auto y_loglik = [&](const Array& resid, double tau_c, double sigma2_c, const Array& pz) {
        Array v = tau_c / pz + sigma2_c;
        return -0.5 * (v.log() + resid.square() / v).sum();
    };

    PosteriorSamples out;
    out.names = {"beta0", "beta_x", "psi", "tau", "sigma2", "sigma_x2", "lambda_x", "lambda_z", "rho", "sigma_z2"};
    out.draws.resize(mcmc.retained(), Index(out.names.size()));
    out.deviance_draws.resize(mcmc.retained());
    out.iterations = mcmc.iterations;
    out.burn_in = mcmc.burn_in;
    out.seed = mcmc.seed;

    Matrix design(n, 3);
    design.col(0) = data.col_sums;
    design.col(1) = data.x_star;

    for (Index it = 0; it < mcmc.iterations; ++it) {
        const bool adapting = it < mcmc.burn_in;
        Array v = tau / prec_z + sigma2;

        // blocked draw of (beta0, beta_x, psi)
        design.col(2) = (s * x).matrix();
        Matrix wd = (design.array().colwise() / v).matrix();
        Matrix q = wd.transpose() * design;
        q.diagonal().array() += 1.0 / prior.beta_variance;
        beta = draw_gaussian_block(q, wd.transpose() * data.y_star, rng);

        Array resid = y - beta[0] * m - (beta[1] + beta[2] * s) * x;

        // treatment-process scale, conjugate through the X* marginal
        sigma_x2 = rng.inverse_gamma(prior.sigma_x2_shape + 0.5 * double(n),
                                     prior.sigma_x2_rate + 0.5 * (x.square() * prec_x).sum());

        // residual confounder variance tau = sigma_z^2 (1 - rho^2), log walk
        {
            const double cand = tau * std::exp(tau_scale.scale() * rng.normal());
            double lp = y_loglik(resid, cand, sigma2, prec_z) - y_loglik(resid, tau, sigma2, prec_z);
            lp += (prior.tau_shape) * (std::log(cand) - std::log(tau)) - prior.tau_rate * (cand - tau);
            check_finite(lp, it);
            const bool accepted = std::log(rng.uniform()) < lp;
            if (accepted) tau = cand;
            tau_scale.observe(accepted, adapting);
        }

        // nugget variance, log walk
        {
            const double cand = sigma2 * std::exp(s2_scale.scale() * rng.normal());
            double lp = y_loglik(resid, tau, cand, prec_z) - y_loglik(resid, tau, sigma2, prec_z);
            lp += (prior.sigma2_shape) * (std::log(cand) - std::log(sigma2)) - prior.sigma2_rate * (cand - sigma2);
            check_finite(lp, it);
            const bool accepted = std::log(rng.uniform()) < lp;
            if (accepted) sigma2 = cand;
            s2_scale.observe(accepted, adapting);
        }

        // lambda_x: enters the adjustment profile and the X* marginal
        {
            const double cand = lambda_x + lx_scale.scale() * rng.normal();
            bool accepted = false;
            if (cand > 0.0 && cand < lambda_z) {
                Array px2 = prec_of(cand);
                Array s2v = ratio_of(px2, prec_z);
                Array resid2 = y - beta[0] * m - (beta[1] + beta[2] * s2v) * x;
                double lp = y_loglik(resid2, tau, sigma2, prec_z) - y_loglik(resid, tau, sigma2, prec_z);
                lp += 0.5 * ((px2.log() - prec_x.log()).sum() - ((px2 - prec_x) * x.square()).sum() / sigma_x2);
                check_finite(lp, it);
                if (std::log(rng.uniform()) < lp) {
                    lambda_x = cand;
                    prec_x = px2;
                    s = s2v;
                    resid = resid2;
                    accepted = true;
                }
            }
            lx_scale.observe(accepted, adapting);
        }

        // lambda_z: adjustment profile, confounder spectrum, and the
        // Uniform(0, lambda_z) prior mass on lambda_x
        {
            const double cand = lambda_z + lz_scale.scale() * rng.normal();
            bool accepted = false;
            if (cand > lambda_x && cand < 1.0) {
                Array pz2 = prec_of(cand);
                Array s2v = ratio_of(prec_x, pz2);
                Array resid2 = y - beta[0] * m - (beta[1] + beta[2] * s2v) * x;
                double lp = y_loglik(resid2, tau, sigma2, pz2) - y_loglik(resid, tau, sigma2, prec_z);
                lp += std::log(lambda_z) - std::log(cand);
                check_finite(lp, it);
                if (std::log(rng.uniform()) < lp) {
                    lambda_z = cand;
                    prec_z = pz2;
                    s = s2v;
                    resid = resid2;
                    accepted = true;
                }
            }
            lz_scale.observe(accepted, adapting);
        }

        if (it >= mcmc.burn_in) {
            const Index row = it - mcmc.burn_in;
            const double eta = beta[2] * std::sqrt(sigma_x2);
            const double sigma_z2 = tau + eta * eta;
            const double rho = (eta == 0.0 ? 0.0 : (eta > 0 ? 1.0 : -1.0)) * std::sqrt(eta * eta / sigma_z2);
            out.draws(row, 0) = beta[0];
            out.draws(row, 1) = beta[1];
            out.draws(row, 2) = beta[2];
            out.draws(row, 3) = tau;
            out.draws(row, 4) = sigma2;
            out.draws(row, 5) = sigma_x2;
            out.draws(row, 6) = lambda_x;
            out.draws(row, 7) = lambda_z;
            out.draws(row, 8) = rho;
            out.draws(row, 9) = sigma_z2;
            out.deviance_draws[row] = gaussian_deviance(resid, tau / prec_z + sigma2);
        }
    }

    Vector pm = out.draws.colwise().mean();
    Array prec_x_pm = prec_of(pm[6]), prec_z_pm = prec_of(pm[7]);
    Array s_pm = ratio_of(prec_x_pm, prec_z_pm);
    Array resid_pm = y - pm[0] * m - (pm[1] + pm[2] * s_pm) * x;
    out.deviance_at_mean = gaussian_deviance(resid_pm, pm[3] / prec_z_pm + pm[4]);
    return out;
}

PosteriorSamples fit_semiparametric_gaussian(const GaussianSpectralData& data, const ConstructedCovariates& covs,
                                             const PriorConfig& prior, const McmcConfig& mcmc) {
    const Index n = data.n();
    require(n >= 3, "need at least 3 regions");
    require(covs.provenance == CovProvenance::discrete, "constructed covariates must come from the graph transform");
    mcmc.validate();
    const bool r2d2 = prior.variant == PriorVariant::semi_r2d2;
    Rng rng(mcmc.seed);

    const BSplineBasis& spline = covs.basis;
    const Index L = spline.size();
    require(covs.columns.rows() == n && covs.columns.cols() == L, "covariates do not match data");

    const Array y = data.y_star.array(), m = data.col_sums.array();

    // fixed spectral design: column 0 intercept M_k, columns 1..L are
    // B_l(omega_k) X*_k
    Matrix bmat = spline.evaluate_matrix(data.omega);  // n x L
    Matrix design(n, 1 + L);
    design.col(0) = data.col_sums;
    for (Index l = 0; l < L; ++l) design.col(1 + l) = bmat.col(l).cwiseProduct(data.x_star);
    Vector b_at_top = spline.evaluate_all(data.omega[n - 1]);  // beta(omega_n) weights

    Matrix iar = L > 1 ? iar_structure_matrix(L) : Matrix::Zero(1, 1);
    const double anchor_prec =
        std::isfinite(prior.b1_anchor_variance) ? 1.0 / prior.b1_anchor_variance : 0.0;

    // state
    Vector coef = Vector::Zero(1 + L);
    double tau2 = mcmc.init_or(
        "tau2", std::max(1e-8, (y - y.mean()).square().sum() / double(n - 1)));
    double r = mcmc.init_or("r", 0.5), lambda_z = mcmc.init_or("lambda_z", 0.5);
    // PCP / R2D2 scale states
    double sigma_b = std::sqrt(mcmc.init_or("sigma_b2", 0.25));
    double sigma_r2 = mcmc.init_or("sigma_R2", 1.0);
    AdaptiveScale r_scale(0.1), lz_scale(0.1), sb_scale(0.5);

    // unit-variance spectrum: c(lambda_z) r f_z + (1 - r), with the
    // normalization c = n / sum_k f_z(omega_k)
    auto unit_variance = [&](double rr, double lz) -> Array {
        Array fz = leroux_spectrum(lz, data.omega);
        const double c = double(n) / fz.sum();
        return c * rr * fz + (1.0 - rr);
    };
    auto sigma_b2_of = [&](double t2) { return r2d2 ? t2 * sigma_r2 : sigma_b * sigma_b; };
    Array u = unit_variance(r, lambda_z);

    PosteriorSamples out;
    out.names = {"beta0"};
    for (Index l = 1; l <= L; ++l) out.names.push_back("b_" + std::to_string(l));
    out.names.push_back("beta_x");
    out.names.insert(out.names.end(), {"tau2", "r", "lambda_z", r2d2 ? "sigma_R2" : "sigma_b2", "sigma_z2", "sigma2"});
    out.draws.resize(mcmc.retained(), Index(out.names.size()));
    out.deviance_draws.resize(mcmc.retained());
    out.iterations = mcmc.iterations;
    out.burn_in = mcmc.burn_in;
    out.seed = mcmc.seed;

    for (Index it = 0; it < mcmc.iterations; ++it) {
        const bool adapting = it < mcmc.burn_in;
        Array v = tau2 * u;

        // joint draw of (beta0, b)
        Matrix wd = (design.array().colwise() / v).matrix();
        Matrix q = wd.transpose() * design;
        q(0, 0) += 1.0 / prior.beta_variance;
        if (L == 1) {
            q(1, 1) += 1.0 / prior.beta_variance;
        } else {
            q.block(1, 1, L, L) += iar / sigma_b2_of(tau2);
            q(1, 1) += anchor_prec;
        }
        coef = draw_gaussian_block(q, wd.transpose() * data.y_star, rng);
        Vector b = coef.tail(L);

        Array resid = y - coef[0] * m - (design.rightCols(L) * b).array();

        // total variance, conjugate; under R2D2 the b prior contributes
        const double b_quad = L > 1 ? b.dot(iar * b) : 0.0;
        {
            double shape = prior.tau2_shape + 0.5 * double(n);
            double rate = prior.tau2_rate + 0.5 * (resid.square() / u).sum();
            if (r2d2 && L > 1) {
                shape += 0.5 * double(L - 1);
                rate += 0.5 * b_quad / sigma_r2;
            }
            tau2 = rng.inverse_gamma(shape, rate);
            v = tau2 * u;
        }

        // spatial proportion r
        {
            const double cand = r + r_scale.scale() * rng.normal();
            bool accepted = false;
            if (cand > 0.0 && cand < 1.0) {
                Array u2 = unit_variance(cand, lambda_z);
                Array v2 = tau2 * u2;
                const double lp =
                    -0.5 * ((v2.log() + resid.square() / v2).sum() - (v.log() + resid.square() / v).sum());
                check_finite(lp, it);
                if (std::log(rng.uniform()) < lp) {
                    r = cand;
                    u = u2;
                    v = v2;
                    accepted = true;
                }
            }
            r_scale.observe(accepted, adapting);
        }

        // spatial dependence lambda_z (changes both f_z and the c factor)
        {
            const double cand = lambda_z + lz_scale.scale() * rng.normal();
            bool accepted = false;
            if (cand > 0.0 && cand < 1.0) {
                Array u2 = unit_variance(r, cand);
                Array v2 = tau2 * u2;
                const double lp =
                    -0.5 * ((v2.log() + resid.square() / v2).sum() - (v.log() + resid.square() / v).sum());
                check_finite(lp, it);
                if (std::log(rng.uniform()) < lp) {
                    lambda_z = cand;
                    u = u2;
                    v = v2;
                    accepted = true;
                }
            }
            lz_scale.observe(accepted, adapting);
        }

        // spline-coefficient scale
        if (L > 1) {
            if (r2d2) {
                const double cand = sigma_r2 * std::exp(sb_scale.scale() * rng.normal());
                double lp = -2.0 * (std::log(cand + 1.0) - std::log(sigma_r2 + 1.0));
                lp += -0.5 * double(L - 1) * (std::log(cand) - std::log(sigma_r2));
                lp += -0.5 * b_quad / tau2 * (1.0 / cand - 1.0 / sigma_r2);
                lp += std::log(cand) - std::log(sigma_r2);  // log-walk Jacobian
                check_finite(lp, it);
                const bool accepted = std::log(rng.uniform()) < lp;
                if (accepted) sigma_r2 = cand;
                sb_scale.observe(accepted, adapting);
            } else {
                const double cand = sigma_b * std::exp(sb_scale.scale() * rng.normal());
                double lp = -prior.pcp_rate * (cand - sigma_b);
                lp += -double(L - 1) * (std::log(cand) - std::log(sigma_b));
                lp += -0.5 * b_quad * (1.0 / (cand * cand) - 1.0 / (sigma_b * sigma_b));
                lp += std::log(cand) - std::log(sigma_b);
                check_finite(lp, it);
                const bool accepted = std::log(rng.uniform()) < lp;
                if (accepted) sigma_b = cand;
                sb_scale.observe(accepted, adapting);
            }
        }

        if (it >= mcmc.burn_in) {
            const Index row = it - mcmc.burn_in;
            out.draws(row, 0) = coef[0];
            for (Index l = 0; l < L; ++l) out.draws(row, 1 + l) = b[l];
            out.draws(row, 1 + L) = b_at_top.dot(b);
            out.draws(row, 2 + L) = tau2;
            out.draws(row, 3 + L) = r;
            out.draws(row, 4 + L) = lambda_z;
            out.draws(row, 5 + L) = r2d2 ? sigma_r2 : sigma_b * sigma_b;
            const double c = double(n) / leroux_spectrum(lambda_z, data.omega).sum();
            out.draws(row, 6 + L) = tau2 * c * r;
            out.draws(row, 7 + L) = tau2 * (1.0 - r);
            out.deviance_draws[row] = gaussian_deviance(resid, v);
        }
    }

    Vector pm = out.draws.colwise().mean();
    Array u_pm = unit_variance(pm[3 + L], pm[4 + L]);
    Array resid_pm = y - pm[0] * m - (design.rightCols(L) * pm.segment(1, L)).array();
    out.deviance_at_mean = gaussian_deviance(resid_pm, pm[2 + L] * u_pm);
    return out;
}

}  // namespace ecar
