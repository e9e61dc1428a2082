#include "ecar/replicate.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "ecar/adjacency.hpp"
#include "ecar/bspline.hpp"
#include "ecar/constructed.hpp"
#include "ecar/fit_continuous.hpp"
#include "ecar/fit_discrete.hpp"
#include "ecar/rng.hpp"

namespace ecar {

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sd_about(const std::vector<double>& v, double center) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double ss = 0.0;
    for (double x : v) ss += (x - center) * (x - center);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void fill_record(ReplicateRecord& rec, const PosteriorSamples& samples) {
    const auto s = summarize_draws("beta_x", samples.column_draws("beta_x"));
    rec.post_mean = s.mean;
    rec.post_sd = s.sd;
    rec.lo95 = s.lo95;
    rec.hi95 = s.hi95;
    rec.ok = true;
}

PosteriorSamples run_discrete_method(DiscreteMethod method, const SpectralBasis& basis,
                                     const GaussianSpectralData& data, const Vector& x, const McmcConfig& mcmc,
                                     const ReplicationOptions& options, Index* chosen_L) {
    switch (method) {
        case DiscreteMethod::standard:
            return fit_standard_gaussian(data, PriorConfig::standard_gaussian(), mcmc);
        case DiscreteMethod::parametric:
            return fit_parsimonious_car(data, PriorConfig::parsimonious_car(), mcmc);
        case DiscreteMethod::semiparametric_pcp:
        case DiscreteMethod::semiparametric_r2d2: {
            const auto prior = PriorConfig::semiparametric(method == DiscreteMethod::semiparametric_r2d2);
            const double lo = data.omega[0];
            const double hi = data.omega[data.omega.size() - 1];
            const auto fit_at = [&](Index L) {
                BSplineBasis spline(L, 3, lo, hi);
                const auto covs = constructed_covariates_discrete(basis, spline, x);
                return fit_semiparametric_gaussian(data, covs, prior, mcmc);
            };
            if (!options.select_L_by_dic) {
                *chosen_L = options.fixed_L;
                return fit_at(options.fixed_L);
            }
            const auto selection = select_L(options.spline_sizes, fit_at);
            *chosen_L = selection.chosen_L;
            return fit_at(selection.chosen_L);
        }
    }
    throw std::invalid_argument("unknown discrete method");
}

ContinuousFit run_continuous_method(ContinuousMethod method, const SimulatedFields& fields, const Matrix& sites,
                                    const MaternPluginEstimate& plugin, const McmcConfig& mcmc,
                                    const ReplicationOptions& options, double omega_max, double cell_area,
                                    Index* chosen_L) {
    const ContinuousPriorConfig prior;
    switch (method) {
        case ContinuousMethod::standard:
            return fit_standard_matern(fields.y, fields.x, sites, plugin, prior, mcmc);
        case ContinuousMethod::flexible:
            return fit_flexible_matern(fields.y, fields.x, sites, plugin, prior, mcmc);
        case ContinuousMethod::parsimonious:
            return fit_parsimonious_matern(fields.y, fields.x, sites, plugin, prior, mcmc);
        case ContinuousMethod::semiparametric: {
            const auto freq = FrequencyGrid::midpoint(options.frequency_grid_size, omega_max);
            const auto fit_at = [&](Index L) {
                BSplineBasis spline(L, 3, 0.0, omega_max);
                const auto covs = constructed_covariates_continuous(sites, fields.x, spline, freq, cell_area);
                return fit_semiparametric_continuous(fields.y, fields.x, sites, covs, plugin, prior, mcmc);
            };
            if (!options.select_L_by_dic) {
                *chosen_L = options.fixed_L;
                return fit_at(options.fixed_L);
            }
            const auto selection = select_L(options.spline_sizes, [&](Index L) { return fit_at(L).samples; });
            *chosen_L = selection.chosen_L;
            return fit_at(selection.chosen_L);
        }
    }
    throw std::invalid_argument("unknown continuous method");
}

void check_run_arguments(std::size_t n_methods, Index replicates, Index parallelism) {
    if (n_methods == 0) throw std::invalid_argument("no methods requested");
    if (replicates < 1) throw std::invalid_argument("need at least one replicate");
    if (parallelism < 1) throw std::invalid_argument("parallelism must be positive");
}

// Shared driver: hand each replicate index to a worker thread; `fit_one`
// fills the n_methods records for that replicate. Records are indexed by
// (replicate, method), so the result is independent of thread scheduling.
template <typename FitReplicate>
std::vector<ReplicateRecord> drive_replicates(Index replicates, Index n_methods, Index parallelism,
                                              const FitReplicate& fit_one) {
    std::vector<ReplicateRecord> records(static_cast<std::size_t>(replicates * n_methods));
    std::atomic<Index> next{0};
    auto work = [&]() {
        for (;;) {
            const Index rep = next.fetch_add(1);
            if (rep >= replicates) return;
            fit_one(rep, &records[static_cast<std::size_t>(rep * n_methods)]);
        }
    };
    const Index threads = std::min(parallelism, replicates);
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (Index t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return records;
}

void check_failure_budget(const std::vector<ReplicateRecord>& records) {
    Index failures = 0;
    std::string first_error;
    for (const auto& r : records)
        if (!r.ok) {
            ++failures;
            if (first_error.empty()) first_error = r.error;
        }
    if (failures * 20 > static_cast<Index>(records.size()))
        throw numeric_error("replication aborted: " + std::to_string(failures) + " of " +
                            std::to_string(records.size()) + " fits failed; first error: " + first_error);
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string format_cell(double value) {
    if (!std::isfinite(value)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

}  // namespace

std::string method_name(DiscreteMethod m) {
    switch (m) {
        case DiscreteMethod::standard: return "standard";
        case DiscreteMethod::parametric: return "parametric";
        case DiscreteMethod::semiparametric_pcp: return "semiparametric_pcp";
        case DiscreteMethod::semiparametric_r2d2: return "semiparametric_r2d2";
    }
    throw std::invalid_argument("unknown discrete method");
}

std::string method_name(ContinuousMethod m) {
    switch (m) {
        case ContinuousMethod::standard: return "standard";
        case ContinuousMethod::flexible: return "flexible";
        case ContinuousMethod::parsimonious: return "parsimonious";
        case ContinuousMethod::semiparametric: return "semiparametric";
    }
    throw std::invalid_argument("unknown continuous method");
}

MethodScore score_replication(const std::string& method, double truth, const std::vector<ReplicateRecord>& records) {
    MethodScore score;
    score.method = method;

    std::vector<double> means, sds, sqerr;
    double covered = 0.0;
    for (const auto& r : records) {
        if (r.method != method) continue;
        if (!r.ok) {
            ++score.failures;
            continue;
        }
        means.push_back(r.post_mean);
        sds.push_back(r.post_sd);
        sqerr.push_back((r.post_mean - truth) * (r.post_mean - truth));
        if (r.lo95 <= truth && truth <= r.hi95) covered += 1.0;
    }
    score.replicates = static_cast<Index>(means.size());
    if (score.replicates == 0) return score;
    const double reps = static_cast<double>(score.replicates);

    const double mean_est = mean_of(means);
    score.bias = mean_est - truth;
    score.bias_se = sd_about(means, mean_est) / std::sqrt(reps);

    const double mse = mean_of(sqerr);
    score.rmse = std::sqrt(mse);
    const double mse_se = sd_about(sqerr, mse) / std::sqrt(reps);
    score.rmse_se = score.rmse > 0.0 ? mse_se / (2.0 * score.rmse) : 0.0;

    score.sd = mean_of(sds);
    score.sd_se = sd_about(sds, score.sd) / std::sqrt(reps);

    score.coverage = covered / reps;
    score.coverage_se = std::sqrt(score.coverage * (1.0 - score.coverage) / reps);
    return score;
}

namespace {

// (phi multiplier, beta_xz) by scenario number
std::pair<double, double> scenario_cell(int scenario) {
    require(scenario >= 1 && scenario <= 5, "scenario must be between 1 and 5");
    switch (scenario) {
        case 1: return {1.0, 0.0};
        case 2: return {1.0, 1.0};
        case 3: return {1.0, 2.0};
        case 4: return {2.0, 1.0};
        default: return {2.0, 2.0};
    }
}

}  // namespace

DiscreteScenario discrete_scenario(int scenario) {
    const auto [mult, load] = scenario_cell(scenario);
    DiscreteScenario s;
    s.phi = mult * 1.0;
    s.beta_xz = load;
    return s;
}

ContinuousScenario continuous_scenario(int scenario) {
    const auto [mult, load] = scenario_cell(scenario);
    ContinuousScenario s;
    s.phi = mult / 15.0;
    s.beta_xz = load;
    return s;
}

ReplicationReport run_replication(const DiscreteScenario& scenario, const std::vector<DiscreteMethod>& methods,
                                  Index replicates, Index parallelism, std::uint64_t seed,
                                  const ReplicationOptions& options) {
    check_run_arguments(methods.size(), replicates, parallelism);
    const auto t0 = std::chrono::steady_clock::now();

    const auto basis = spectral_basis_of(build_lattice_adjacency(scenario.rows, scenario.cols));
    const DiscreteSimulator sim(scenario, basis);
    const Index n_methods = static_cast<Index>(methods.size());

    auto fit_one = [&](Index rep, ReplicateRecord* recs) {
        Rng seeder = Rng::for_replicate(seed, rep);
        const std::uint64_t data_seed = seeder.raw();
        const auto fields = sim.draw(data_seed);
        const auto data = make_spectral_data(basis, fields.y, fields.x);
        for (Index m = 0; m < n_methods; ++m) {
            McmcConfig mcmc;
            mcmc.iterations = options.iterations;
            mcmc.burn_in = options.burn_in;
            mcmc.seed = seeder.raw();
            ReplicateRecord& rec = recs[m];
            rec.method = method_name(methods[static_cast<std::size_t>(m)]);
            rec.replicate = rep;
            try {
                Index chosen_L = 0;
                const auto samples = run_discrete_method(methods[static_cast<std::size_t>(m)], basis, data, fields.x,
                                                         mcmc, options, &chosen_L);
                fill_record(rec, samples);
                rec.chosen_L = chosen_L;
            } catch (const std::exception& e) {
                rec.ok = false;
                rec.error = e.what();
            }
        }
    };

    ReplicationReport report;
    report.scenario = "discrete";
    report.phi = scenario.phi;
    report.beta_xz = scenario.beta_xz;
    report.truth = scenario.beta_x;
    report.replicates = replicates;
    report.records = drive_replicates(replicates, n_methods, parallelism, fit_one);
    check_failure_budget(report.records);
    for (const auto m : methods) report.scores.push_back(score_replication(method_name(m), report.truth, report.records));
    report.runtime_seconds = elapsed_seconds(t0);
    return report;
}

ReplicationReport run_replication(const ContinuousScenario& scenario, const std::vector<ContinuousMethod>& methods,
                                  Index replicates, Index parallelism, std::uint64_t seed,
                                  const ReplicationOptions& options) {
    check_run_arguments(methods.size(), replicates, parallelism);
    const auto t0 = std::chrono::steady_clock::now();

    const ContinuousSimulator sim(scenario);
    const Index n_methods = static_cast<Index>(methods.size());
    const double spacing_r = 1.0 / static_cast<double>(scenario.rows - 1);
    const double spacing_c = 1.0 / static_cast<double>(scenario.cols - 1);
    const double omega_max = M_PI / std::max(spacing_r, spacing_c);
    const double cell_area = spacing_r * spacing_c;

    auto fit_one = [&](Index rep, ReplicateRecord* recs) {
        Rng seeder = Rng::for_replicate(seed, rep);
        const std::uint64_t data_seed = seeder.raw();
        for (Index m = 0; m < n_methods; ++m)
            recs[m].replicate = rep, recs[m].method = method_name(methods[static_cast<std::size_t>(m)]);

        SimulatedFields fields;
        MaternPluginEstimate plugin;
        try {
            fields = sim.draw(data_seed);
            plugin = fit_matern_mle_x(fields.x, sim.sites());
        } catch (const std::exception& e) {
            for (Index m = 0; m < n_methods; ++m) recs[m].error = e.what();
            return;
        }
        for (Index m = 0; m < n_methods; ++m) {
            McmcConfig mcmc;
            mcmc.iterations = options.iterations;
            mcmc.burn_in = options.burn_in;
            mcmc.seed = seeder.raw();
            ReplicateRecord& rec = recs[m];
            try {
                Index chosen_L = 0;
                const auto fit = run_continuous_method(methods[static_cast<std::size_t>(m)], fields, sim.sites(),
                                                       plugin, mcmc, options, omega_max, cell_area, &chosen_L);
                fill_record(rec, fit.samples);
                rec.chosen_L = chosen_L;
            } catch (const std::exception& e) {
                rec.ok = false;
                rec.error = e.what();
            }
        }
    };

    ReplicationReport report;
    report.scenario = "continuous";
    report.phi = scenario.phi;
    report.beta_xz = scenario.beta_xz;
    report.truth = scenario.beta_x;
    report.replicates = replicates;
    report.records = drive_replicates(replicates, n_methods, parallelism, fit_one);
    check_failure_budget(report.records);
    for (const auto m : methods) report.scores.push_back(score_replication(method_name(m), report.truth, report.records));
    report.runtime_seconds = elapsed_seconds(t0);
    return report;
}

std::string report_csv(const ReplicationReport& report) {
    std::string out =
        "scenario,method,phi,beta_xz,replicates,failures,"
        "rmse_x100,rmse_se_x100,bias_x100,bias_se_x100,sd_x100,sd_se_x100,coverage_pct,coverage_se_pct\n";
    for (const auto& s : report.scores) {
        out += report.scenario + "," + s.method + "," + format_cell(report.phi) + "," + format_cell(report.beta_xz) +
               "," + std::to_string(s.replicates) + "," + std::to_string(s.failures);
        const double cells[] = {100.0 * s.rmse, 100.0 * s.rmse_se, 100.0 * s.bias,     100.0 * s.bias_se,
                                100.0 * s.sd,   100.0 * s.sd_se,   100.0 * s.coverage, 100.0 * s.coverage_se};
        for (double c : cells) out += "," + format_cell(c);
        out += "\n";
    }
    return out;
}

std::string report_json(const ReplicationReport& report) {
    nlohmann::json j;
    j["scenario"] = report.scenario;
    j["phi"] = report.phi;
    j["beta_xz"] = report.beta_xz;
    j["truth"] = report.truth;
    j["replicates"] = report.replicates;
    j["runtime_seconds"] = report.runtime_seconds;
    j["scores"] = nlohmann::json::array();
    for (const auto& s : report.scores) {
        nlohmann::json row;
        row["method"] = s.method;
        row["replicates"] = s.replicates;
        row["failures"] = s.failures;
        row["rmse"] = s.rmse;
        row["rmse_se"] = s.rmse_se;
        row["bias"] = s.bias;
        row["bias_se"] = s.bias_se;
        row["sd"] = s.sd;
        row["sd_se"] = s.sd_se;
        row["coverage"] = s.coverage;
        row["coverage_se"] = s.coverage_se;
        j["scores"].push_back(row);
    }
    j["records"] = nlohmann::json::array();
    for (const auto& r : report.records) {
        nlohmann::json row;
        row["method"] = r.method;
        row["replicate"] = r.replicate;
        row["post_mean"] = r.post_mean;
        row["post_sd"] = r.post_sd;
        row["lo95"] = r.lo95;
        row["hi95"] = r.hi95;
        row["chosen_L"] = r.chosen_L;
        row["ok"] = r.ok;
        row["error"] = r.error;
        j["records"].push_back(row);
    }
    return j.dump(2);
}

}  // namespace ecar
