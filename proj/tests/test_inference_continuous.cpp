#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <random>
#include <stdexcept>
#include <vector>

#include "ecar/bspline.hpp"
#include "ecar/constructed.hpp"
#include "ecar/fit_continuous.hpp"
#include "ecar/matern.hpp"
#include "ecar/mcmc.hpp"
#include "ecar/replicate.hpp"
#include "ecar/rng.hpp"
#include "ecar/simulate.hpp"
#include "helpers.hpp"

using namespace ecar;
using namespace ecar_test;

namespace {

Matrix unit_grid(Index rows, Index cols) { return unit_square_sites(rows, cols); }

// correlated Matern pair: x from R_x, z = rho R_zx R_x^-1 x + innovation so
// that Var(z_i) = 1; y = beta0 + beta_x x + beta_z z + noise
struct ConfoundedDraw {
    Vector x, z, y;
};

ConfoundedDraw draw_confounded(const Matrix& sites, double nu_x, double nu_z, double nu_xz, double phi, double rho,
                               double beta_x, double noise_sd, Rng& rng) {
    const Matrix dist = distance_matrix(sites);
    const Index n = dist.rows();
    const Matrix rx = matern_correlation_matrix(dist, nu_x, phi);
    const Matrix rz = matern_correlation_matrix(dist, nu_z, phi);
    const Matrix rzx = matern_correlation_matrix(dist, nu_xz, phi);
    Eigen::LLT<Matrix> lx(rx);
    ConfoundedDraw d;
    d.x = lx.matrixL() * rng.normal_vector(n);
    const Matrix s = lx.matrixL().solve(rzx);
    Matrix cz = rz - rho * rho * (s.transpose() * s);
    Eigen::LLT<Matrix> lcz(cz + 1e-10 * Matrix::Identity(n, n));
    d.z = rho * (rzx * lx.solve(d.x)) + lcz.matrixL() * rng.normal_vector(n);
    d.y = d.x * beta_x + d.z + noise_sd * rng.normal_vector(n);
    return d;
}

double mean_of(const Vector& v) { return v.mean(); }

double sd_of(const Vector& v) {
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / double(v.size() - 1));
}

bool intervals_overlap(const ParameterSummary& a, const ParameterSummary& b) {
    return a.lo95 <= b.hi95 && b.lo95 <= a.hi95;
}

MaternPluginEstimate hand_plugin(double phi, double nu, double sigma_x2) {
    MaternPluginEstimate p;
    p.phi_hat = phi;
    p.nu_hat = nu;
    p.sigma_x2_hat = sigma_x2;
    p.loglik = 0.0;
    p.start_loglik = 0.0;
    p.starts = 1;
    return p;
}

}  // namespace

TEST_CASE("plug-in fit recovers white noise as a nugget-like field") {
    Rng rng(401);
    const Matrix sites = unit_grid(10, 10);
    const Vector x = 1.5 * rng.normal_vector(100);

    const auto fit = fit_matern_mle_x(x, sites);
    const double sample_var = (x.array() - x.mean()).square().sum() / 100.0;
    CHECK(fit.sigma_x2_hat == doctest::Approx(sample_var).epsilon(0.10));
    CHECK(fit.loglik >= fit.start_loglik);
    CHECK(fit.starts == 5);
}

TEST_CASE("plug-in fit is scale equivariant") {
    Rng rng(402);
    const Matrix sites = unit_grid(10, 10);
    const Matrix dist = distance_matrix(sites);
    Eigen::LLT<Matrix> llt(matern_correlation_matrix(dist, 0.7, 0.12) + 1e-10 * Matrix::Identity(100, 100));
    const Vector x = llt.matrixL() * rng.normal_vector(100);

    const auto base = fit_matern_mle_x(x, sites);
    const auto scaled = fit_matern_mle_x(2.0 * x, sites);
    CHECK(scaled.phi_hat == doctest::Approx(base.phi_hat).epsilon(1e-9));
    CHECK(scaled.nu_hat == doctest::Approx(base.nu_hat).epsilon(1e-9));
    CHECK(scaled.sigma_x2_hat == doctest::Approx(4.0 * base.sigma_x2_hat).epsilon(1e-9));
}

TEST_CASE("plug-in fit input validation") {
    Rng rng(403);
    const Matrix sites = unit_grid(4, 4);  // 16 < 20 sites
    CHECK_THROWS_AS(fit_matern_mle_x(rng.normal_vector(16), sites), std::invalid_argument);

    Matrix dup = unit_grid(5, 5);
    dup.row(1) = dup.row(0);
    CHECK_THROWS_AS(fit_matern_mle_x(rng.normal_vector(25), dup), std::invalid_argument);

    CHECK_THROWS_AS(fit_matern_mle_x(rng.normal_vector(24), unit_grid(5, 5)), std::invalid_argument);
}

TEST_CASE("plug-in fit is insensitive to site ordering") {
    Rng rng(404);
    const Matrix sites = unit_grid(10, 10);
    const Matrix dist = distance_matrix(sites);
    Eigen::LLT<Matrix> llt(matern_correlation_matrix(dist, 0.5, 0.15) + 1e-10 * Matrix::Identity(100, 100));
    const Vector x = llt.matrixL() * rng.normal_vector(100);

    std::vector<Index> perm(100);
    for (Index i = 0; i < 100; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), std::mt19937(9));
    Matrix psites(100, 2);
    Vector px(100);
    for (Index i = 0; i < 100; ++i) {
        psites.row(i) = sites.row(perm[static_cast<std::size_t>(i)]);
        px[i] = x[perm[static_cast<std::size_t>(i)]];
    }

    const auto base = fit_matern_mle_x(x, sites);
    const auto permuted = fit_matern_mle_x(px, psites);
    CHECK(permuted.phi_hat == doctest::Approx(base.phi_hat).epsilon(1e-6));
    CHECK(permuted.nu_hat == doctest::Approx(base.nu_hat).epsilon(1e-6));
    CHECK(permuted.sigma_x2_hat == doctest::Approx(base.sigma_x2_hat).epsilon(1e-6));
}

TEST_CASE("bivariate coupling constraints hold on every draw") {
    Rng rng(405);
    const Matrix sites = unit_grid(10, 10);
    const auto d = draw_confounded(sites, 0.5, 1.2, 0.9, 0.15, 0.6, 1.0, 0.25, rng);
    const auto plugin = hand_plugin(0.15, 0.5, 1.0);

    ContinuousPriorConfig prior;
    McmcConfig mc;
    mc.iterations = 1200;
    mc.burn_in = 300;
    mc.seed = 11;

    SUBCASE("posterior draws") {
        const auto fit = fit_flexible_matern(d.y, d.x, sites, plugin, prior, mc);
        const Vector rho = fit.samples.column_draws("rho");
        const Vector nu_z = fit.samples.column_draws("nu_z");
        const Vector nu_xz = fit.samples.column_draws("nu_xz");
        const Vector sz2 = fit.samples.column_draws("sigma_z2");
        const Vector s2 = fit.samples.column_draws("sigma2");
        for (Index i = 0; i < rho.size(); ++i) {
            CHECK(nu_z[i] > 0.0);
            CHECK(nu_z[i] <= prior.nu_max + 1e-9);
            // cross smoothness strictly above the average of the marginals
            CHECK(nu_xz[i] > 0.5 * (plugin.nu_hat + nu_z[i]) - 1e-12);
            // correlation inside the validity bound of the coupled spectrum
            CHECK(rho[i] * rho[i] < plugin.nu_hat * nu_z[i] / (nu_xz[i] * nu_xz[i]) + 1e-12);
            CHECK(sz2[i] > 0.0);
            CHECK(s2[i] > 0.0);
        }
        CHECK(fit.tag == "flexible");
        CHECK(fit.samples.deviance_draws.size() == fit.samples.retained());
        CHECK(std::isfinite(fit.samples.deviance_at_mean));
        CHECK(std::isfinite(dic(fit.samples)));
    }
    SUBCASE("prior draws cover the support without leaving it") {
        ContinuousPriorConfig wide = prior;
        wide.prior_only = true;
        McmcConfig long_mc;
        long_mc.iterations = 20000;
        long_mc.burn_in = 2000;
        long_mc.seed = 12;
        const auto fit = fit_flexible_matern(d.y, d.x, sites, plugin, wide, long_mc);
        const Vector rho = fit.samples.column_draws("rho");
        const Vector nu_z = fit.samples.column_draws("nu_z");
        const Vector nu_xz = fit.samples.column_draws("nu_xz");
        for (Index i = 0; i < rho.size(); ++i) {
            CHECK(nu_xz[i] > 0.5 * (plugin.nu_hat + nu_z[i]) - 1e-12);
            CHECK(rho[i] * rho[i] < plugin.nu_hat * nu_z[i] / (nu_xz[i] * nu_xz[i]) + 1e-12);
        }
        // the prior really explores both signs and the full smoothness range
        CHECK(rho.minCoeff() < -0.2);
        CHECK(rho.maxCoeff() > 0.2);
        CHECK(nu_z.maxCoeff() > 10.0);
        CHECK(std::isnan(fit.samples.deviance_at_mean));
        CHECK(!fit.collinear_adjustment);
    }
}

TEST_CASE("matched-smoothness prior draws reproduce their construction") {
    Rng rng(406);
    const Matrix sites = unit_grid(6, 6);
    const Vector x = rng.normal_vector(36);
    const Vector y = rng.normal_vector(36);
    const auto plugin = hand_plugin(0.1, 0.5, 1.0);

    ContinuousPriorConfig prior;
    prior.prior_only = true;
    McmcConfig mc;
    mc.iterations = 610000;
    mc.burn_in = 10000;
    mc.seed = 21;
    const auto fit = fit_parsimonious_matern(y, x, sites, plugin, prior, mc);

    const Vector rho = fit.samples.column_draws("rho");
    const Vector nu_z = fit.samples.column_draws("nu_z");
    const Vector nu_xz = fit.samples.column_draws("nu_xz");
    const Vector sz2 = fit.samples.column_draws("sigma_z2");
    const Vector s2 = fit.samples.column_draws("sigma2");
    const Vector bx = fit.samples.column_draws("beta_x");

    // derived coordinates whose prior laws are known exactly
    const Index m = rho.size();
    std::vector<double> w_draws, rho_tilde, total_var, u_frac, bx_draws;
    for (Index i = 0; i < m; i += 300) {
        const double w = nu_z[i] - plugin.nu_hat;
        const double su = sz2[i] * (1.0 - rho[i] * rho[i]);
        const double s = su + s2[i];
        w_draws.push_back(w);
        rho_tilde.push_back(rho[i] * nu_xz[i] / std::sqrt(plugin.nu_hat * nu_z[i]));
        total_var.push_back(s);
        u_frac.push_back(su / s);
        bx_draws.push_back(bx[i]);
        CHECK(nu_xz[i] == doctest::Approx(0.5 * (plugin.nu_hat + nu_z[i])).epsilon(1e-9));
    }
    const std::size_t k = w_draws.size();
    REQUIRE(k > 1500);

    // oracle samples from the construction itself
    Rng orng(99);
    const double cap = prior.nu_max - plugin.nu_hat;
    const double atan_cap = std::atan(cap / prior.nu_scale);
    std::vector<double> w_oracle(k), rho_oracle(k), s_oracle(k), u_oracle(k), bx_oracle(k);
    for (std::size_t i = 0; i < k; ++i) {
        w_oracle[i] = prior.nu_scale * std::tan(orng.uniform() * atan_cap);
        rho_oracle[i] = orng.uniform(-1.0, 1.0);
        s_oracle[i] = orng.exponential(prior.total_variance_rate);
        u_oracle[i] = orng.uniform();
        bx_oracle[i] = orng.normal(0.0, std::sqrt(prior.beta_variance));
    }

    CHECK(ks_p_value(w_draws, w_oracle) > 0.01);
    CHECK(ks_p_value(rho_tilde, rho_oracle) > 0.01);
    CHECK(ks_p_value(total_var, s_oracle) > 0.01);
    CHECK(ks_p_value(u_frac, u_oracle) > 0.01);
    CHECK(ks_p_value(bx_draws, bx_oracle) > 0.01);
}

TEST_CASE("uncoupled flexible fit agrees with the unadjusted baseline") {
    Rng rng(407);
    const Matrix sites = unit_grid(12, 12);
    const Matrix dist = distance_matrix(sites);
    const Index n = 144;
    Eigen::LLT<Matrix> lx(matern_correlation_matrix(dist, 0.5, 0.15) + 1e-10 * Matrix::Identity(n, n));
    Eigen::LLT<Matrix> ld(matern_correlation_matrix(dist, 1.0, 0.15) + 1e-10 * Matrix::Identity(n, n));
    const Vector x = lx.matrixL() * rng.normal_vector(n);
    const Vector delta = ld.matrixL() * rng.normal_vector(n);
    const Vector y = Vector::Ones(n) + x + delta + 0.25 * rng.normal_vector(n);

    const auto plugin = fit_matern_mle_x(x, sites);
    ContinuousPriorConfig prior;
    McmcConfig mc;
    mc.iterations = 2500;
    mc.burn_in = 700;
    mc.seed = 31;

    const auto flex = fit_flexible_matern(y, x, sites, plugin, prior, mc);
    mc.seed = 32;
    const auto std_fit = fit_standard_matern(y, x, sites, plugin, prior, mc);

    const auto bx_flex = summarize_draws("beta_x", flex.samples.column_draws("beta_x"));
    const auto bx_std = summarize_draws("beta_x", std_fit.samples.column_draws("beta_x"));
    CHECK(intervals_overlap(bx_flex, bx_std));
    CHECK(std::abs(bx_flex.mean - 1.0) < 4.0 * bx_flex.sd);
    CHECK(std_fit.tag == "standard");
    CHECK(!flex.collinear_adjustment);     // uncoupled adjustment stays quiet
    CHECK(!std_fit.collinear_adjustment);  // no adjustment exists to collide
    CHECK(std_fit.zhat.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matched-smoothness confounding raises the collinearity warning") {
    // nu_z = nu_x and shared phi: the adjustment is proportional to a smooth
    // of x that the data cannot separate from x itself
    Rng rng(Rng::for_replicate(77, 1).raw());
    const Matrix sites = unit_grid(12, 12);
    const auto d = draw_confounded(sites, 0.5, 0.5, 0.5, 0.1, 0.5, 1.0, 0.25, rng);

    const auto plugin = fit_matern_mle_x(d.x, sites);
    ContinuousPriorConfig prior;
    prior.nu_scale = 0.5;  // keep the smoothness posterior near the matched regime
    McmcConfig mc;
    mc.iterations = 3000;
    mc.burn_in = 1200;
    mc.seed = 501;

    const auto fit = fit_parsimonious_matern(d.y, d.x, sites, plugin, prior, mc);
    CHECK(fit.collinear_adjustment);
}

TEST_CASE("trio fits are insensitive to site ordering") {
    Rng rng(408);
    const Matrix sites = unit_grid(10, 10);
    const auto d = draw_confounded(sites, 0.5, 1.5, 1.0, 0.15, 0.5, 1.0, 0.25, rng);
    const auto plugin = fit_matern_mle_x(d.x, sites);

    std::vector<Index> perm(100);
    for (Index i = 0; i < 100; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), std::mt19937(10));
    Matrix psites(100, 2);
    Vector px(100), py(100);
    for (Index i = 0; i < 100; ++i) {
        psites.row(i) = sites.row(perm[static_cast<std::size_t>(i)]);
        px[i] = d.x[perm[static_cast<std::size_t>(i)]];
        py[i] = d.y[perm[static_cast<std::size_t>(i)]];
    }

    ContinuousPriorConfig prior;
    McmcConfig mc;
    mc.iterations = 4000;
    mc.burn_in = 1000;
    mc.seed = 41;
    const auto base = fit_standard_matern(d.y, d.x, sites, plugin, prior, mc);
    const auto permuted = fit_standard_matern(py, px, psites, plugin, prior, mc);

    const auto b0 = summarize_draws("beta_x", base.samples.column_draws("beta_x"));
    const auto b1 = summarize_draws("beta_x", permuted.samples.column_draws("beta_x"));
    // same posterior sampled through a different site order: means agree to
    // Monte Carlo accuracy
    CHECK(std::abs(b0.mean - b1.mean) < 0.5 * (b0.sd + b1.sd));
    CHECK(intervals_overlap(b0, b1));
}

TEST_CASE("frequency-profile fit recovers known spline weights") {
    Rng rng(409);
    const Matrix sites = unit_grid(10, 10);
    const Matrix dist = distance_matrix(sites);
    const Index n = 100;
    const double nu_hat = 0.5, phi_hat = 0.15;
    Eigen::LLT<Matrix> lx(matern_correlation_matrix(dist, nu_hat, phi_hat) + 1e-10 * Matrix::Identity(n, n));
    const Vector x = lx.matrixL() * rng.normal_vector(n);

    const double omega_max = M_PI * 9.0;  // pi / (1/9) grid spacing
    const auto freq = FrequencyGrid::midpoint(96, omega_max);
    const Index L = 4;
    BSplineBasis spline(L, 3, 0.0, omega_max);
    const auto covs = constructed_covariates_continuous(sites, x, spline, freq, (1.0 / 81.0));

    Vector b_true(L);
    b_true << 0.8, 0.4, 0.1, 0.0;
    Eigen::LLT<Matrix> ld(matern_correlation_matrix(dist, nu_hat, phi_hat) + 1e-10 * Matrix::Identity(n, n));
    const Vector delta_field = ld.matrixL() * rng.normal_vector(n);
    const Vector delta = 0.6 * delta_field;
    const Vector y = Vector::Ones(n) * 0.5 + x * 1.0 + covs.columns * b_true + delta + 0.2 * rng.normal_vector(n);

    const auto plugin = hand_plugin(phi_hat, nu_hat, 1.0);
    ContinuousPriorConfig prior;
    McmcConfig mc;
    mc.iterations = 6000;
    mc.burn_in = 1500;
    mc.seed = 51;
    const auto fit = fit_semiparametric_continuous(y, x, sites, covs, plugin, prior, mc);

    CHECK(fit.tag == "semiparametric");
    for (Index l = 0; l < L; ++l) {
        const auto s = summarize_draws("b", fit.samples.column_draws("b_" + std::to_string(l + 1)));
        CHECK(std::abs(s.mean - b_true[l]) < 4.0 * s.sd);
    }
    const auto bx = summarize_draws("beta_x", fit.samples.column_draws("beta_x"));
    CHECK(std::abs(bx.mean - 1.0) < 4.0 * bx.sd);

    SUBCASE("column layout") {
        CHECK(fit.samples.names[0] == "beta0");
        CHECK(fit.samples.names[1] == "beta_x");
        CHECK(fit.samples.names[2] == "b_1");
        CHECK(std::count(fit.samples.names.begin(), fit.samples.names.end(), "sigma_b2") == 1);
    }
    SUBCASE("prior-only runs are rejected") {
        ContinuousPriorConfig p = prior;
        p.prior_only = true;
        CHECK_THROWS_AS(fit_semiparametric_continuous(y, x, sites, covs, plugin, p, mc), std::invalid_argument);
    }
}

TEST_CASE("zero spline weights reduce the frequency-profile fit to the baseline") {
    Rng rng(410);
    const Matrix sites = unit_grid(11, 11);
    const Matrix dist = distance_matrix(sites);
    const Index n = 121;
    Eigen::LLT<Matrix> lx(matern_correlation_matrix(dist, 0.5, 0.12) + 1e-10 * Matrix::Identity(n, n));
    Eigen::LLT<Matrix> ld(matern_correlation_matrix(dist, 0.8, 0.12) + 1e-10 * Matrix::Identity(n, n));
    const Vector x = lx.matrixL() * rng.normal_vector(n);
    const Vector confounder_free = ld.matrixL() * rng.normal_vector(n);
    const Vector y = Vector::Ones(n) + x + 0.7 * confounder_free + 0.25 * rng.normal_vector(n);

    const auto plugin = fit_matern_mle_x(x, sites);
    const double omega_max = M_PI * 10.0;
    const auto freq = FrequencyGrid::midpoint(96, omega_max);
    BSplineBasis spline(5, 3, 0.0, omega_max);
    const auto covs = constructed_covariates_continuous(sites, x, spline, freq, 0.01);

    ContinuousPriorConfig prior;
    McmcConfig mc;
    mc.iterations = 4000;
    mc.burn_in = 1000;
    mc.seed = 61;
    const auto semi = fit_semiparametric_continuous(y, x, sites, covs, plugin, prior, mc);
    mc.seed = 62;
    const auto base = fit_standard_matern(y, x, sites, plugin, prior, mc);

    const auto bx_semi = summarize_draws("beta_x", semi.samples.column_draws("beta_x"));
    const auto bx_base = summarize_draws("beta_x", base.samples.column_draws("beta_x"));
    CHECK(intervals_overlap(bx_semi, bx_base));
    CHECK(std::abs(bx_semi.mean - 1.0) < 4.0 * bx_semi.sd);
    CHECK(!semi.collinear_adjustment);
}

TEST_CASE("continuous fit input validation") {
    Rng rng(411);
    const Matrix sites = unit_grid(5, 5);
    const Vector x = rng.normal_vector(25);
    const Vector y = rng.normal_vector(25);
    const auto plugin = hand_plugin(0.1, 0.5, 1.0);
    ContinuousPriorConfig prior;
    McmcConfig mc;
    mc.iterations = 100;
    mc.burn_in = 10;

    CHECK_THROWS_AS(fit_standard_matern(y.head(8), x.head(8), sites.topRows(8), plugin, prior, mc),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_standard_matern(y.head(10), x, sites, plugin, prior, mc), std::invalid_argument);
    CHECK_THROWS_AS(fit_flexible_matern(y, x, sites, hand_plugin(0.1, -0.5, 1.0), prior, mc), std::invalid_argument);
    ContinuousPriorConfig bad = prior;
    bad.nu_max = 0.3;  // below any plug-in smoothness
    CHECK_THROWS_AS(fit_parsimonious_matern(y, x, sites, plugin, bad, mc), std::invalid_argument);
}

// --- replication-scale studies ---

TEST_CASE("[slow] plug-in accuracy at the replication grid size") {
    const ContinuousScenario sc;  // 23 x 23, nu = phi = truth below
    const ContinuousSimulator sim(sc);
    const Index reps = 20;
    std::vector<std::future<std::pair<double, double>>> futs;
    for (Index r = 0; r < reps; ++r)
        futs.push_back(std::async(std::launch::async, [&sim, r] {
            const auto fields = sim.draw(Rng::for_replicate(1300, r).raw());
            const auto fit = fit_matern_mle_x(fields.x, sim.sites());
            return std::pair<double, double>{std::abs(fit.phi_hat - 0.1) / 0.1, std::abs(fit.nu_hat - 0.5) / 0.5};
        }));
    Index pass = 0;
    for (auto& f : futs) {
        const auto [ephi, enu] = f.get();
        pass += (ephi <= 0.30 && enu <= 0.30) ? 1 : 0;
    }
    CHECK(pass >= 16);  // at least 80% of replicates within 30% relative error
}

TEST_CASE("[slow] plug-in error shrinks as the grid grows") {
    const std::vector<Index> grids = {12, 16, 23};
    std::vector<double> med_err;
    for (Index g : grids) {
        ContinuousScenario sc;
        sc.rows = sc.cols = g;
        const ContinuousSimulator sim(sc);
        const Index reps = 20;
        std::vector<std::future<double>> futs;
        for (Index r = 0; r < reps; ++r)
            futs.push_back(std::async(std::launch::async, [&sim, r] {
                const auto fields = sim.draw(Rng::for_replicate(1400, r).raw());
                const auto fit = fit_matern_mle_x(fields.x, sim.sites());
                return std::max(std::abs(fit.phi_hat - 0.1) / 0.1, std::abs(fit.nu_hat - 0.5) / 0.5);
            }));
        std::vector<double> errs;
        for (auto& f : futs) errs.push_back(f.get());
        std::sort(errs.begin(), errs.end());
        med_err.push_back(0.5 * (errs[9] + errs[10]));
    }
    CHECK(med_err[1] <= med_err[0] + 0.02);
    CHECK(med_err[2] <= med_err[1] + 0.02);
}

TEST_CASE("[slow] coupled-spectrum fit covers its own generating model") {
    const Index side = 14;
    const double phi = 0.15, nu_z = 2.5, nu_xz = 1.5, rho = 0.8;
    const Matrix sites = unit_grid(side, side);
    const Index reps = 20;
    std::vector<std::future<double>> futs;
    for (Index rep = 0; rep < reps; ++rep)
        futs.push_back(std::async(std::launch::async, [&, rep] {
            Rng rng(Rng::for_replicate(520, rep).raw());
            const auto d = draw_confounded(sites, 0.5, nu_z, nu_xz, phi, rho, 1.0, 0.25, rng);
            const auto plugin = fit_matern_mle_x(d.x, sites);
            ContinuousPriorConfig prior;
            prior.nu_scale = 3.0;
            McmcConfig mc;
            mc.iterations = 6000;
            mc.burn_in = 2000;
            mc.seed = 9000 + static_cast<std::uint64_t>(rep);
            const auto fit = fit_flexible_matern(d.y, d.x, sites, plugin, prior, mc);
            const Vector bx = fit.samples.column_draws("beta_x");
            return std::abs(mean_of(bx) - 1.0) / sd_of(bx);
        }));
    Index pass = 0;
    for (auto& f : futs) pass += f.get() < 3.0 ? 1 : 0;
    CHECK(pass >= 18);  // within 3 posterior SD in at least 90% of replicates
}

TEST_CASE("[slow] unconfounded replication keeps nominal coverage for the parametric fits") {
    ContinuousScenario sc;
    sc.beta_xz = 0.0;
    ReplicationOptions opt;
    opt.iterations = 2500;
    opt.burn_in = 750;
    const auto report =
        run_replication(sc, {ContinuousMethod::flexible, ContinuousMethod::parsimonious}, 50, 8, 6100, opt);
    for (const auto& s : report.scores) {
        CAPTURE(s.method);
        CHECK(s.failures == 0);
        if (s.method == "flexible") CHECK(s.coverage >= 0.85);
        if (s.method == "parsimonious") CHECK(s.coverage >= 0.80);
    }
}

TEST_CASE("[slow] frequency-profile fit absorbs strong smooth confounding") {
    ContinuousScenario sc;
    sc.beta_xz = 2.0;  // strong confounding at the narrow smoothing bandwidth
    ReplicationOptions opt;
    opt.iterations = 2500;
    opt.burn_in = 750;
    const auto report = run_replication(sc, {ContinuousMethod::semiparametric}, 50, 8, 6200, opt);
    const auto& s = report.scores[0];
    CHECK(s.failures == 0);
    CHECK(std::abs(s.bias) <= 0.03);
    CHECK(s.coverage >= 0.88);
}
