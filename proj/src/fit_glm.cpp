#include <cmath>

#include "ecar/adjacency.hpp"
#include "ecar/fit_discrete.hpp"
#include "ecar/rng.hpp"

namespace ecar {

namespace {

using Array = Eigen::ArrayXd;

// observation log likelihood of one site given its linear predictor theta_i
struct ObsModel {
    GlmFamily family;
    double log_r = 0.0;    // negbin dispersion, shared
    double sigma2 = 1.0;   // gaussian noise

    double loglik(double y, double offset, double theta) const {
        switch (family) {
            case GlmFamily::poisson: {
                const double mu = offset * std::exp(theta);
                return y * (std::log(offset) + theta) - mu - std::lgamma(y + 1.0);
            }
            case GlmFamily::negbin: {
                const double r = std::exp(log_r);
                const double mu = offset * std::exp(theta);
                return std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0) + r * std::log(r / (r + mu)) +
                       y * std::log(mu / (r + mu));
            }
            case GlmFamily::gaussian:
                return -0.5 * std::log(2.0 * M_PI * sigma2) - 0.5 * (y - theta) * (y - theta) / sigma2;
        }
        return 0.0;
    }
};

Vector graph_quadratic_matvec(const AdjacencyGraph& g, const Vector& v) {
    // R v with R the neighborhood matrix (degree diagonal minus adjacency)
    Vector out(v.size());
    for (Index i = 0; i < v.size(); ++i) out[i] = double(g.neighbor_counts[i]) * v[i];
    for (auto [a, b] : g.edges) {
        out[a] -= v[b];
        out[b] -= v[a];
    }
    return out;
}

double edge_increment_sum(const AdjacencyGraph& g, const Vector& v) {
    double acc = 0.0;
    for (auto [a, b] : g.edges) {
        const double d = v[a] - v[b];
        acc += d * d;
    }
    return acc;
}

Vector draw_gaussian_block(const Matrix& Q, const Vector& rhs, Rng& rng) {
    Eigen::LLT<Matrix> llt(Q);
    if (llt.info() != Eigen::Success) throw numeric_error("coefficient block precision not positive definite");
    Vector mean = llt.solve(rhs);
    Vector z = rng.normal_vector(Q.rows());
    return mean + llt.matrixU().solve(z);
}

}  // namespace

GlmFit fit_glm_car(const GlmData& data, const AdjacencyGraph& graph, const SpectralBasis& basis,
                   const ConstructedCovariates& covs, const PriorConfig& prior, const McmcConfig& mcmc) {
    const Index n = data.y.size();
    require(n == graph.n && n == basis.n(), "data, graph and basis sizes differ");
    require(data.offset.size() == n, "offset length mismatch");
    const bool counts = data.family != GlmFamily::gaussian;
    if (counts) {
        require(data.y.minCoeff() >= 0.0, "counts must be nonnegative");
        require(data.offset.minCoeff() > 0.0, "offsets must be positive");
    }
    const Index p = data.covariates.cols();
    if (p > 0) require(data.covariates.rows() == n, "covariate rows mismatch");
    const Index L = covs.basis.size();
    require(covs.columns.rows() == n && covs.columns.cols() == L, "constructed covariates mismatch");
    mcmc.validate();
    Rng rng(mcmc.seed);

    // neighbor lists for the single-site conditional updates
    std::vector<std::vector<Index>> nbrs(n);
    for (auto [a, b] : graph.edges) {
        nbrs[a].push_back(b);
        nbrs[b].push_back(a);
    }

    // fixed design: intercept, constructed covariates, extra covariates
    const Index q_cols = 1 + L + p;
    Matrix design(n, q_cols);
    design.col(0).setOnes();
    design.middleCols(1, L) = covs.columns;
    if (p > 0) design.rightCols(p) = data.covariates;
    const Matrix dtd = design.transpose() * design;
    Matrix dtrd(q_cols, q_cols);
    {
        Matrix rd(n, q_cols);
        for (Index j = 0; j < q_cols; ++j) rd.col(j) = graph_quadratic_matvec(graph, design.col(j));
        dtrd = design.transpose() * rd;
    }
    Matrix iar = L > 1 ? iar_structure_matrix(L) : Matrix::Zero(1, 1);
    const double anchor_prec = std::isfinite(prior.b1_anchor_variance) ? 1.0 / prior.b1_anchor_variance : 0.0;
    Vector b_at_top = covs.basis.evaluate_all(basis.omega[n - 1]);

    // state
    ObsModel obs{data.family, 0.0, 1.0};
    Vector coef = Vector::Zero(q_cols);
    Vector theta = Vector::Zero(n);
    if (counts) {
        for (Index i = 0; i < n; ++i) theta[i] = std::log((data.y[i] + 0.5) / data.offset[i]);
    } else {
        theta = data.y;
    }
    Vector mu = design * coef;
    Vector theta_c = theta - mu;  // centered field
    double sigma_z2 = 1.0, lambda_z = 0.5, sigma_b = 0.5;
    std::vector<AdaptiveScale> theta_scales(n, AdaptiveScale(0.5));
    AdaptiveScale lz_scale(0.1), sb_scale(0.5), lr_scale(0.3);

    auto car_logdet = [&](double lambda) {
        return (1.0 - lambda + lambda * basis.omega.array()).log().sum();
    };
    auto car_quad = [&](double lambda) {
        return (1.0 - lambda) * theta_c.squaredNorm() + lambda * edge_increment_sum(graph, theta_c);
    };
    auto total_loglik = [&]() {
        double acc = 0.0;
        for (Index i = 0; i < n; ++i) acc += obs.loglik(data.y[i], data.offset[i], theta[i]);
        return acc;
    };

    PosteriorSamples out;
    out.names = {"beta0"};
    for (Index l = 1; l <= L; ++l) out.names.push_back("b_" + std::to_string(l));
    out.names.push_back("beta_x");
    for (Index j = 1; j <= p; ++j) out.names.push_back("beta_c_" + std::to_string(j));
    out.names.insert(out.names.end(), {"sigma_z2", "lambda_z"});
    if (L > 1) out.names.push_back("sigma_b2");
    if (data.family == GlmFamily::negbin) out.names.push_back("log_r");
    if (data.family == GlmFamily::gaussian) out.names.push_back("sigma2");
    out.draws.resize(mcmc.retained(), Index(out.names.size()));
    out.deviance_draws.resize(mcmc.retained());
    out.iterations = mcmc.iterations;
    out.burn_in = mcmc.burn_in;
    out.seed = mcmc.seed;
    Vector theta_acc = Vector::Zero(n);

    for (Index it = 0; it < mcmc.iterations; ++it) {
        const bool adapting = it < mcmc.burn_in;

        // latent field, one site at a time against its CAR full conditional
        for (Index i = 0; i < n; ++i) {
            const double qii = 1.0 - lambda_z + lambda_z * double(graph.neighbor_counts[i]);
            double nb_sum = 0.0;
            for (Index j : nbrs[i]) nb_sum += theta_c[j];
            const double cond_mean = lambda_z / qii * nb_sum;
            const double cand = theta[i] + theta_scales[i].scale() * rng.normal();
            const double cand_c = cand - mu[i];
            double lp = obs.loglik(data.y[i], data.offset[i], cand) - obs.loglik(data.y[i], data.offset[i], theta[i]);
            lp += -0.5 * qii / sigma_z2 *
                  ((cand_c - cond_mean) * (cand_c - cond_mean) - (theta_c[i] - cond_mean) * (theta_c[i] - cond_mean));
            if (!std::isfinite(lp)) throw numeric_error("non-finite log posterior at iteration " + std::to_string(it));
            const bool accepted = std::log(rng.uniform()) < lp;
            if (accepted) {
                theta[i] = cand;
                theta_c[i] = cand_c;
            }
            theta_scales[i].observe(accepted, adapting);
        }

        // coefficient block (conditionally Gaussian given theta)
        {
            Matrix q = ((1.0 - lambda_z) * dtd + lambda_z * dtrd) / sigma_z2;
            q(0, 0) += 1.0 / prior.beta_variance;
            if (L == 1) {
                q(1, 1) += 1.0 / prior.beta_variance;
            } else {
                q.block(1, 1, L, L) += iar / (sigma_b * sigma_b);
                q(1, 1) += anchor_prec;
            }
            for (Index j = 0; j < p; ++j) q(1 + L + j, 1 + L + j) += 1.0 / prior.beta_variance;
            Vector qtheta = (1.0 - lambda_z) * theta + lambda_z * graph_quadratic_matvec(graph, theta);
            coef = draw_gaussian_block(q, design.transpose() * qtheta / sigma_z2, rng);
            mu = design * coef;
            theta_c = theta - mu;
        }

        // spline-coefficient scale (PCP)
        if (L > 1) {
            const Vector b = coef.segment(1, L);
            const double b_quad = b.dot(iar * b);
            const double cand = sigma_b * std::exp(sb_scale.scale() * rng.normal());
            double lp = -prior.pcp_rate * (cand - sigma_b);
            lp += -double(L - 1) * (std::log(cand) - std::log(sigma_b));
            lp += -0.5 * b_quad * (1.0 / (cand * cand) - 1.0 / (sigma_b * sigma_b));
            lp += std::log(cand) - std::log(sigma_b);
            const bool accepted = std::isfinite(lp) && std::log(rng.uniform()) < lp;
            if (accepted) sigma_b = cand;
            sb_scale.observe(accepted, adapting);
        }

        // field variance, conjugate
        sigma_z2 = rng.inverse_gamma(prior.glm_sigma_z2_shape + 0.5 * double(n),
                                     prior.glm_sigma_z2_rate + 0.5 * car_quad(lambda_z));

        // spatial dependence
        {
            const double cand = lambda_z + lz_scale.scale() * rng.normal();
            bool accepted = false;
            if (cand > 0.0 && cand < 1.0) {
                const double lp =
                    0.5 * (car_logdet(cand) - car_logdet(lambda_z)) - 0.5 * (car_quad(cand) - car_quad(lambda_z)) / sigma_z2;
                if (!std::isfinite(lp))
                    throw numeric_error("non-finite log posterior at iteration " + std::to_string(it));
                if (std::log(rng.uniform()) < lp) {
                    lambda_z = cand;
                    accepted = true;
                }
            }
            lz_scale.observe(accepted, adapting);
        }

        // family-specific scale parameters
        if (data.family == GlmFamily::negbin) {
            const double cand = obs.log_r + lr_scale.scale() * rng.normal();
            ObsModel obs_c = obs;
            obs_c.log_r = cand;
            double lp = -0.5 * (cand * cand - obs.log_r * obs.log_r) / prior.log_r_variance;
            for (Index i = 0; i < n; ++i)
                lp += obs_c.loglik(data.y[i], data.offset[i], theta[i]) -
                      obs.loglik(data.y[i], data.offset[i], theta[i]);
            const bool accepted = std::isfinite(lp) && std::log(rng.uniform()) < lp;
            if (accepted) obs.log_r = cand;
            lr_scale.observe(accepted, adapting);
        } else if (data.family == GlmFamily::gaussian) {
            obs.sigma2 = rng.inverse_gamma(0.1 + 0.5 * double(n), 0.1 + 0.5 * (data.y - theta).squaredNorm());
        }

        if (it >= mcmc.burn_in) {
            const Index row = it - mcmc.burn_in;
            Index c = 0;
            out.draws(row, c++) = coef[0];
            for (Index l = 0; l < L; ++l) out.draws(row, c++) = coef[1 + l];
            out.draws(row, c++) = b_at_top.dot(coef.segment(1, L));
            for (Index j = 0; j < p; ++j) out.draws(row, c++) = coef[1 + L + j];
            out.draws(row, c++) = sigma_z2;
            out.draws(row, c++) = lambda_z;
            if (L > 1) out.draws(row, c++) = sigma_b * sigma_b;
            if (data.family == GlmFamily::negbin) out.draws(row, c++) = obs.log_r;
            if (data.family == GlmFamily::gaussian) out.draws(row, c++) = obs.sigma2;
            out.deviance_draws[row] = -2.0 * total_loglik();
            theta_acc += theta;
        }
    }

    GlmFit fit;
    fit.theta_mean = theta_acc / double(mcmc.retained());

    // conditional deviance at the posterior mean of the latent field
    ObsModel obs_pm = obs;
    if (data.family == GlmFamily::negbin) {
        Vector lr = out.draws.col(out.column("log_r"));
        obs_pm.log_r = std::log(lr.array().exp().mean());
    }
    if (data.family == GlmFamily::gaussian) obs_pm.sigma2 = out.draws.col(out.column("sigma2")).mean();
    double dev = 0.0;
    for (Index i = 0; i < n; ++i) dev += obs_pm.loglik(data.y[i], data.offset[i], fit.theta_mean[i]);
    out.deviance_at_mean = -2.0 * dev;

    fit.samples = std::move(out);
    return fit;
}

}  // namespace ecar
