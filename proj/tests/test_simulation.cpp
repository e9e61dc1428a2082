#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "json.hpp"

#include "ecar/adjacency.hpp"
#include "ecar/replicate.hpp"
#include "ecar/rng.hpp"
#include "ecar/simulate.hpp"
#include "ecar/spectral_basis.hpp"
#include "helpers.hpp"

using namespace ecar;
using namespace ecar_test;

namespace {

double correlation(const Vector& a, const Vector& b) {
    const Vector ac = a.array() - a.mean();
    const Vector bc = b.array() - b.mean();
    return ac.dot(bc) / (ac.norm() * bc.norm());
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("kernel smoother weights on three collinear sites") {
    Matrix sites(3, 2);
    sites << 0.0, 0.0, 1.0, 0.0, 2.0, 0.0;
    const auto sm = kernel_smoothing_matrix(sites, 1.0);

    const double e1 = std::exp(-1.0), e4 = std::exp(-4.0);
    const double s0 = 1.0 + e1 + e4;
    const double s1 = 1.0 + 2.0 * e1;
    CHECK(sm.w(0, 0) == doctest::Approx(1.0 / s0).epsilon(1e-12));
    CHECK(sm.w(0, 1) == doctest::Approx(e1 / s0).epsilon(1e-12));
    CHECK(sm.w(0, 2) == doctest::Approx(e4 / s0).epsilon(1e-12));
    CHECK(sm.w(1, 0) == doctest::Approx(e1 / s1).epsilon(1e-12));
    CHECK(sm.w(1, 1) == doctest::Approx(1.0 / s1).epsilon(1e-12));
    CHECK(sm.w(1, 2) == sm.w(1, 0));
    // outer rows mirror each other
    CHECK(sm.w(2, 2) == doctest::Approx(sm.w(0, 0)).epsilon(1e-12));
    CHECK(sm.phi == 1.0);
}

TEST_CASE("kernel smoother is row stochastic and permutation equivariant") {
    Rng rng(31);
    const Index n = 9;
    Matrix sites(n, 2);
    for (Index i = 0; i < n; ++i) {
        sites(i, 0) = rng.uniform(0.0, 3.0);
        sites(i, 1) = rng.uniform(0.0, 3.0);
    }
    const auto sm = kernel_smoothing_matrix(sites, 0.7);
    for (Index i = 0; i < n; ++i) CHECK(sm.w.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((sm.w.array() >= 0.0).all());

    // reversing the site order permutes rows and columns together
    Matrix rev = sites.colwise().reverse().eval();
    const auto sm_rev = kernel_smoothing_matrix(rev, 0.7);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            CHECK(sm_rev.w(i, j) == doctest::Approx(sm.w(n - 1 - i, n - 1 - j)).epsilon(1e-12));
}

TEST_CASE("kernel smoother shrinks to the identity as the bandwidth vanishes") {
    const Matrix sites = lattice_sites(3, 3);
    const auto sm = kernel_smoothing_matrix(sites, 1e-2);
    CHECK((sm.w - Matrix::Identity(9, 9)).cwiseAbs().maxCoeff() < 1e-12);

    SUBCASE("single site is the 1x1 identity") {
        Matrix one(1, 2);
        one << 0.4, -1.2;
        const auto sm1 = kernel_smoothing_matrix(one, 2.0);
        CHECK(sm1.w.rows() == 1);
        CHECK(sm1.w(0, 0) == 1.0);
    }
    SUBCASE("invalid inputs are rejected") {
        CHECK_THROWS_AS(kernel_smoothing_matrix(sites, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(kernel_smoothing_matrix(sites, -1.0), std::invalid_argument);
        CHECK_THROWS_AS(kernel_smoothing_matrix(Matrix(0, 2), 1.0), std::invalid_argument);
    }
}

TEST_CASE("scenario defaults are frozen") {
    const DiscreteScenario d;
    CHECK(d.rows == 40);
    CHECK(d.cols == 40);
    CHECK(d.sigma_x2 == 1.7);
    CHECK(d.sigma_z2 == 1.0);
    CHECK(d.lambda == 0.95);
    CHECK(d.beta_x == 0.5);
    CHECK(d.beta_z == 0.5);
    CHECK(d.sigma2 == 0.0625);
    CHECK(d.phi == 1.0);

    const ContinuousScenario c;
    CHECK(c.rows == 23);
    CHECK(c.cols == 23);
    CHECK(c.sigma_x2 == 1.0);
    CHECK(c.sigma_z2 == 1.0);
    CHECK(c.phi_x == 0.1);
    CHECK(c.phi_z == 0.1);
    CHECK(c.nu_x == 0.5);
    CHECK(c.nu_z == 0.5);
    CHECK(c.beta_x == 1.0);
    CHECK(c.beta_z == 1.0);
    CHECK(c.sigma2 == 0.0625);
    CHECK(c.phi == doctest::Approx(1.0 / 15.0).epsilon(1e-15));
}

TEST_CASE("discrete simulation is seed deterministic") {
    auto f = make_lattice(8, 8);
    DiscreteScenario sc;
    sc.rows = sc.cols = 8;
    const DiscreteSimulator sim(sc, f.basis);

    const auto a = sim.draw(42);
    const auto b = sim.draw(42);
    const auto c = sim.draw(43);
    CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.z - b.z).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.x - c.x).cwiseAbs().maxCoeff() > 0.0);

    SUBCASE("one-shot call matches the cached simulator") {
        const auto d = simulate_discrete(sc, f.basis, 42);
        CHECK((a.y - d.y).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("basis size must match the scenario") {
        auto small = make_lattice(5, 5);
        CHECK_THROWS_AS(DiscreteSimulator(sc, small.basis), std::invalid_argument);
    }
    SUBCASE("scenario validation") {
        DiscreteScenario bad = sc;
        bad.lambda = 1.0;
        CHECK_THROWS_AS(DiscreteSimulator(bad, f.basis), std::invalid_argument);
        bad = sc;
        bad.sigma_x2 = -1.0;
        CHECK_THROWS_AS(DiscreteSimulator(bad, f.basis), std::invalid_argument);
    }
}

TEST_CASE("discrete treatment field matches its spectral covariance") {
    auto f = make_lattice(8, 8);
    DiscreteScenario sc;
    sc.rows = sc.cols = 8;
    const DiscreteSimulator sim(sc, f.basis);
    const Index n = 64;

    // exact total variance: sigma_x2 * sum_k (1 - lambda + lambda omega_k)^-1
    const Vector prec = (1.0 - sc.lambda + sc.lambda * f.basis.omega.array()).matrix();
    const double total = sc.sigma_x2 * prec.cwiseInverse().sum();

    const Index reps = 400;
    std::vector<double> sq(reps);
    for (Index r = 0; r < reps; ++r) sq[static_cast<std::size_t>(r)] = sim.draw(Rng::for_replicate(7, r).raw()).x.squaredNorm();
    const double ratio = mean_of(sq) / total;
    const double se = sd_of(sq) / (total * std::sqrt(double(reps)));
    CHECK(std::abs(ratio - 1.0) < 4.0 * se + 0.01);
    (void)n;
}

TEST_CASE("discrete response decomposes into treatment, confounder, and noise") {
    auto f = make_lattice(12, 12);
    DiscreteScenario sc;
    sc.rows = sc.cols = 12;
    sc.beta_xz = 2.0;
    const DiscreteSimulator sim(sc, f.basis);

    std::vector<double> resvar;
    for (Index r = 0; r < 60; ++r) {
        const auto fields = sim.draw(Rng::for_replicate(11, r).raw());
        const Vector res = fields.y - sc.beta_x * fields.x - sc.beta_z * fields.z;
        resvar.push_back(res.squaredNorm() / double(res.size()));
    }
    CHECK(mean_of(resvar) == doctest::Approx(sc.sigma2).epsilon(0.05));
}

TEST_CASE("unsmoothed fields are uncorrelated") {
    auto f = make_lattice(10, 10);
    DiscreteScenario sc;
    sc.rows = sc.cols = 10;
    sc.beta_xz = 0.0;
    const DiscreteSimulator sim(sc, f.basis);

    std::vector<double> cors;
    for (Index r = 0; r < 100; ++r) {
        const auto fields = sim.draw(Rng::for_replicate(13, r).raw());
        cors.push_back(correlation(fields.x, fields.z));
    }
    const double t = mean_of(cors) / (sd_of(cors) / std::sqrt(100.0));
    CHECK(std::abs(t) < 4.0);
}

TEST_CASE("continuous simulation is seed deterministic and respects independence") {
    ContinuousScenario sc;
    sc.rows = sc.cols = 10;
    const ContinuousSimulator sim(sc);
    CHECK(sim.sites().rows() == 100);
    CHECK(sim.sites().col(0).maxCoeff() == 1.0);

    const auto a = sim.draw(5);
    const auto b = sim.draw(5);
    CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.x - sim.draw(6).x).cwiseAbs().maxCoeff() > 0.0);

    SUBCASE("one-shot call matches") {
        const auto d = simulate_continuous(sc, 5);
        CHECK((a.y - d.y).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("beta_xz = 0 decouples the fields") {
        ContinuousScenario null = sc;
        null.beta_xz = 0.0;
        const ContinuousSimulator nsim(null);
        std::vector<double> cors;
        for (Index r = 0; r < 100; ++r) {
            const auto fields = nsim.draw(Rng::for_replicate(17, r).raw());
            cors.push_back(correlation(fields.x, fields.z));
        }
        const double t = mean_of(cors) / (sd_of(cors) / std::sqrt(100.0));
        CHECK(std::abs(t) < 4.0);
    }
    SUBCASE("scenario validation") {
        ContinuousScenario bad = sc;
        bad.nu_x = 0.0;
        CHECK_THROWS_AS(ContinuousSimulator{bad}, std::invalid_argument);
    }
}

TEST_CASE("continuous treatment variogram matches the exponential correlation") {
    const ContinuousScenario sc;  // 23 x 23, nu = 0.5, phi = 0.1
    const ContinuousSimulator sim(sc);
    const Matrix& sites = sim.sites();
    const Index n = sites.rows();

    // site pairs at distance ~0.2, where the correlation is exp(-2)
    std::vector<std::pair<Index, Index>> pairs;
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (std::abs((sites.row(i) - sites.row(j)).norm() - 0.2) < 0.005) pairs.emplace_back(i, j);
    REQUIRE(pairs.size() > 100);

    const Index reps = 200;
    std::vector<double> gamma_hat(reps);
    for (Index r = 0; r < reps; ++r) {
        const auto fields = sim.draw(Rng::for_replicate(19, r).raw());
        double acc = 0.0;
        for (const auto& [i, j] : pairs) {
            const double d = fields.x[i] - fields.x[j];
            acc += 0.5 * d * d;
        }
        gamma_hat[static_cast<std::size_t>(r)] = acc / double(pairs.size());
    }
    const double expected = sc.sigma_x2 * (1.0 - std::exp(-2.0));
    const double se = sd_of(gamma_hat) / std::sqrt(double(reps));
    CHECK(std::abs(mean_of(gamma_hat) - expected) < 3.0 * se + 0.01);
}

TEST_CASE("spectral correlation diagnostic flags nothing under independence") {
    auto f = make_lattice(10, 10);
    DiscreteScenario sc;
    sc.rows = sc.cols = 10;
    sc.beta_xz = 0.0;
    const DiscreteSimulator sim(sc, f.basis);

    std::vector<Vector> xs, zs;
    for (Index r = 0; r < 200; ++r) {
        const auto fields = sim.draw(Rng::for_replicate(23, r).raw());
        xs.push_back(fields.x);
        zs.push_back(fields.z);
    }
    const Vector d = spectral_correlation_diagnostic(xs, zs, f.basis);
    CHECK(d.size() == 100);
    CHECK(d.cwiseAbs().maxCoeff() < 4.5 / std::sqrt(200.0));

    SUBCASE("input validation") {
        CHECK_THROWS_AS(spectral_correlation_diagnostic({xs[0]}, {zs[0]}, f.basis), std::invalid_argument);
        auto zs_short = zs;
        zs_short.pop_back();
        CHECK_THROWS_AS(spectral_correlation_diagnostic(xs, zs_short, f.basis), std::invalid_argument);
        auto f5 = make_lattice(5, 5);
        CHECK_THROWS_AS(spectral_correlation_diagnostic(xs, zs, f5.basis), std::invalid_argument);
    }
}

TEST_CASE("replicate scoring reproduces hand-computed operating characteristics") {
    std::vector<ReplicateRecord> records;
    const double truth = 1.0;
    auto push = [&](double mean, double sd, double lo, double hi, bool ok) {
        ReplicateRecord r;
        r.method = "m";
        r.replicate = static_cast<Index>(records.size());
        r.post_mean = mean;
        r.post_sd = sd;
        r.lo95 = lo;
        r.hi95 = hi;
        r.ok = ok;
        records.push_back(r);
    };
    push(1.2, 0.30, 0.6, 1.8, true);
    push(0.8, 0.20, 0.4, 1.2, true);
    push(1.5, 0.25, 1.1, 1.9, true);  // misses the truth
    push(0.0, 0.00, 0.0, 0.0, false);

    const auto s = score_replication("m", truth, records);
    CHECK(s.replicates == 3);
    CHECK(s.failures == 1);
    CHECK(s.bias == doctest::Approx(0.5 / 3.0).epsilon(1e-12));
    CHECK(s.bias_se == doctest::Approx(0.3511885 / std::sqrt(3.0)).epsilon(1e-5));
    CHECK(s.rmse == doctest::Approx(std::sqrt(0.11)).epsilon(1e-12));
    CHECK(s.rmse_se == doctest::Approx((0.1212436 / std::sqrt(3.0)) / (2.0 * std::sqrt(0.11))).epsilon(1e-5));
    CHECK(s.sd == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s.sd_se == doctest::Approx(0.05 / std::sqrt(3.0)).epsilon(1e-9));
    CHECK(s.coverage == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(s.coverage_se == doctest::Approx(std::sqrt((2.0 / 3.0) * (1.0 / 3.0) / 3.0)).epsilon(1e-9));

    SUBCASE("exact estimates give zero error scores") {
        std::vector<ReplicateRecord> exact;
        for (int i = 0; i < 3; ++i) {
            ReplicateRecord r;
            r.method = "m";
            r.post_mean = truth;
            r.post_sd = 0.1;
            r.lo95 = truth - 0.2;
            r.hi95 = truth + 0.2;
            r.ok = true;
            exact.push_back(r);
        }
        const auto z = score_replication("m", truth, exact);
        CHECK(z.rmse == 0.0);
        CHECK(z.rmse_se == 0.0);
        CHECK(z.bias == 0.0);
        CHECK(z.coverage == 1.0);
        CHECK(z.coverage_se == 0.0);
    }
    SUBCASE("unknown method scores empty") {
        const auto z = score_replication("other", truth, records);
        CHECK(z.replicates == 0);
        CHECK(std::isnan(z.rmse));
    }
}

TEST_CASE("single replicate report equals its one record") {
    DiscreteScenario sc;
    sc.rows = sc.cols = 8;
    ReplicationOptions opt;
    opt.iterations = 600;
    opt.burn_in = 200;
    const auto report = run_replication(sc, {DiscreteMethod::standard}, 1, 1, 99, opt);

    REQUIRE(report.records.size() == 1);
    REQUIRE(report.scores.size() == 1);
    const auto& rec = report.records[0];
    const auto& s = report.scores[0];
    CHECK(rec.ok);
    CHECK(s.method == "standard");
    CHECK(s.replicates == 1);
    CHECK(s.rmse == doctest::Approx(std::abs(rec.post_mean - report.truth)).epsilon(1e-12));
    CHECK(s.bias == doctest::Approx(rec.post_mean - report.truth).epsilon(1e-12));
    CHECK(s.sd == doctest::Approx(rec.post_sd).epsilon(1e-12));
    CHECK(((s.coverage == 0.0) || (s.coverage == 1.0)));
    CHECK(report.truth == 0.5);
    CHECK(report.runtime_seconds > 0.0);

    SUBCASE("argument validation") {
        CHECK_THROWS_AS(run_replication(sc, std::vector<DiscreteMethod>{}, 1, 1, 99, opt), std::invalid_argument);
        CHECK_THROWS_AS(run_replication(sc, {DiscreteMethod::standard}, 0, 1, 99, opt), std::invalid_argument);
        CHECK_THROWS_AS(run_replication(sc, {DiscreteMethod::standard}, 1, 0, 99, opt), std::invalid_argument);
    }
}

TEST_CASE("parallelism does not change the report") {
    DiscreteScenario sc;
    sc.rows = sc.cols = 8;
    ReplicationOptions opt;
    opt.iterations = 500;
    opt.burn_in = 150;
    const std::vector<DiscreteMethod> methods = {DiscreteMethod::standard, DiscreteMethod::parametric};

    const auto serial = run_replication(sc, methods, 4, 1, 1234, opt);
    const auto parallel = run_replication(sc, methods, 4, 8, 1234, opt);

    REQUIRE(serial.records.size() == parallel.records.size());
    for (std::size_t i = 0; i < serial.records.size(); ++i) {
        CHECK(serial.records[i].method == parallel.records[i].method);
        CHECK(serial.records[i].replicate == parallel.records[i].replicate);
        CHECK(serial.records[i].post_mean == parallel.records[i].post_mean);
        CHECK(serial.records[i].post_sd == parallel.records[i].post_sd);
        CHECK(serial.records[i].lo95 == parallel.records[i].lo95);
        CHECK(serial.records[i].hi95 == parallel.records[i].hi95);
    }
    for (std::size_t i = 0; i < serial.scores.size(); ++i) {
        CHECK(serial.scores[i].rmse == parallel.scores[i].rmse);
        CHECK(serial.scores[i].coverage == parallel.scores[i].coverage);
    }
}

TEST_CASE("independent seed streams decorrelate the estimates") {
    DiscreteScenario sc;
    sc.rows = sc.cols = 8;
    ReplicationOptions opt;
    opt.iterations = 400;
    opt.burn_in = 100;
    const Index reps = 30;

    const auto a = run_replication(sc, {DiscreteMethod::standard}, reps, 8, 100, opt);
    const auto b = run_replication(sc, {DiscreteMethod::standard}, reps, 8, 200, opt);

    Vector ea(reps), eb(reps);
    for (Index r = 0; r < reps; ++r) {
        ea[r] = a.records[static_cast<std::size_t>(r)].post_mean;
        eb[r] = b.records[static_cast<std::size_t>(r)].post_mean;
    }
    CHECK(std::abs(correlation(ea, eb)) < 3.0 / std::sqrt(double(reps) - 1.0));
}

TEST_CASE("failed fits beyond the budget abort the run") {
    ContinuousScenario sc;
    sc.rows = sc.cols = 4;  // 16 sites: too few for the plug-in fit, every replicate fails
    ReplicationOptions opt;
    opt.iterations = 200;
    opt.burn_in = 50;
    CHECK_THROWS_AS(run_replication(sc, {ContinuousMethod::standard}, 2, 1, 3, opt), numeric_error);
}

TEST_CASE("report serialization carries the scores and records") {
    DiscreteScenario sc;
    sc.rows = sc.cols = 8;
    ReplicationOptions opt;
    opt.iterations = 400;
    opt.burn_in = 100;
    const auto report = run_replication(sc, {DiscreteMethod::standard}, 2, 2, 55, opt);

    const std::string csv = report_csv(report);
    CHECK(csv.find("scenario,method,phi,beta_xz,replicates,failures,") == 0);
    CHECK(csv.find("discrete,standard,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);  // header + one method row

    const auto j = nlohmann::json::parse(report_json(report));
    CHECK(j["scenario"] == "discrete");
    CHECK(j["truth"] == 0.5);
    CHECK(j["replicates"] == 2);
    CHECK(j["records"].size() == 2);
    CHECK(j["scores"].size() == 1);
    CHECK(j["records"][0]["ok"] == true);
    CHECK(j["scores"][0]["method"] == "standard");
}

// --- full-size studies ---

TEST_CASE("[slow] smoothed confounding lifts the field correlation to its frozen levels") {
    auto f = make_lattice(40, 40);
    struct Cell {
        double phi, beta_xz, expected;
    };
    const std::vector<Cell> cells = {{1.0, 1.0, 0.62}, {1.0, 2.0, 0.80}, {2.0, 1.0, 0.46}, {2.0, 2.0, 0.63}};
    for (const auto& cell : cells) {
        CAPTURE(cell.phi);
        CAPTURE(cell.beta_xz);
        DiscreteScenario sc;
        sc.phi = cell.phi;
        sc.beta_xz = cell.beta_xz;
        const DiscreteSimulator sim(sc, f.basis);
        double acc = 0.0;
        const Index reps = 200;
        for (Index r = 0; r < reps; ++r) {
            const auto fields = sim.draw(Rng::for_replicate(900, r).raw());
            acc += correlation(fields.x, fields.z);
        }
        CHECK(std::abs(acc / double(reps) - cell.expected) < 0.05);
    }
}

TEST_CASE("[slow] confounding concentrates at low frequency") {
    auto f = make_lattice(40, 40);
    const Index n = f.basis.n();
    const Index q = 3 * n / 4;  // top quartile = highest frequencies
    auto top_quartile_mean = [&](double phi) {
        DiscreteScenario sc;
        sc.phi = phi;
        sc.beta_xz = 2.0;
        const DiscreteSimulator sim(sc, f.basis);
        std::vector<Vector> xs, zs;
        for (Index r = 0; r < 500; ++r) {
            const auto fields = sim.draw(Rng::for_replicate(901, r).raw());
            xs.push_back(fields.x);
            zs.push_back(fields.z);
        }
        const Vector d = spectral_correlation_diagnostic(xs, zs, f.basis);
        return std::pair<double, double>{d.segment(q, n - q).mean(), d.segment(0, n / 4).mean()};
    };
    const auto [top1, low1] = top_quartile_mean(1.0);
    const auto [top2, low2] = top_quartile_mean(2.0);
    // wider smoothing kills the high-frequency correlation faster
    CHECK(top2 < 0.1);
    CHECK(top1 > top2);
    // the low-frequency end carries the confounding; the wide smoother
    // compresses it into an even narrower low band
    CHECK(low1 > 0.5);
    CHECK(low2 > 0.15);
    CHECK(low2 > 20.0 * top2);
}

TEST_CASE("[slow] unadjusted fits inherit the frozen confounding bias") {
    DiscreteScenario sc;  // 40 x 40 defaults: phi = 1, beta_xz = 1
    ReplicationOptions opt;
    opt.iterations = 5000;
    opt.burn_in = 1000;
    const auto report = run_replication(sc, {DiscreteMethod::standard}, 100, 8, 7100, opt);
    const auto& s = report.scores[0];
    CHECK(s.failures == 0);
    CHECK(std::abs(100.0 * s.bias - 18.9) < 2.0);
    CHECK(s.coverage < 0.5);
}
