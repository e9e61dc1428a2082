#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ecar/mcmc.hpp"
#include "ecar/simulate.hpp"
#include "ecar/types.hpp"

namespace ecar {

enum class DiscreteMethod { standard, parametric, semiparametric_pcp, semiparametric_r2d2 };
enum class ContinuousMethod { standard, flexible, parsimonious, semiparametric };

std::string method_name(DiscreteMethod m);
std::string method_name(ContinuousMethod m);

// One fitted replicate: the treatment-coefficient posterior reduced to the
// numbers the operating characteristics need.
struct ReplicateRecord {
    std::string method;
    Index replicate = 0;
    double post_mean = std::numeric_limits<double>::quiet_NaN();
    double post_sd = std::numeric_limits<double>::quiet_NaN();
    double lo95 = std::numeric_limits<double>::quiet_NaN();
    double hi95 = std::numeric_limits<double>::quiet_NaN();
    Index chosen_L = 0;  // basis size picked by DIC; 0 when not applicable
    bool ok = false;
    std::string error;
};

// Replicate-averaged operating characteristics. Monte Carlo standard errors
// are replicate-level (sd across replicates / sqrt(R)); the RMSE one applies
// the delta method to the mean squared error. Coverage is a fraction in
// [0, 1] here; the CSV writer rescales.
struct MethodScore {
    std::string method;
    Index replicates = 0;  // successful replicates scored
    Index failures = 0;
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double rmse_se = std::numeric_limits<double>::quiet_NaN();
    double bias = std::numeric_limits<double>::quiet_NaN();
    double bias_se = std::numeric_limits<double>::quiet_NaN();
    double sd = std::numeric_limits<double>::quiet_NaN();
    double sd_se = std::numeric_limits<double>::quiet_NaN();
    double coverage = std::numeric_limits<double>::quiet_NaN();
    double coverage_se = std::numeric_limits<double>::quiet_NaN();
};

struct ReplicationReport {
    std::string scenario;  // "discrete" or "continuous"
    double phi = 0.0;
    double beta_xz = 0.0;
    double truth = 0.0;
    Index replicates = 0;
    double runtime_seconds = 0.0;
    std::vector<MethodScore> scores;
    std::vector<ReplicateRecord> records;
};

// Operating characteristics for one method's successful records against the
// true coefficient. Coverage counts 95% equal-tailed intervals containing
// the truth.
MethodScore score_replication(const std::string& method, double truth, const std::vector<ReplicateRecord>& records);

// Numbered study settings. Scenario 1 is unconfounded (beta_xz = 0); 2-5
// sweep the confounder smoothing phi over {base, 2 base} and the loading
// beta_xz over {1, 2}: 2 = (base, 1), 3 = (base, 2), 4 = (2 base, 1),
// 5 = (2 base, 2). The base bandwidth is 1 on the lattice and 1/15 on the
// unit square.
DiscreteScenario discrete_scenario(int scenario);
ContinuousScenario continuous_scenario(int scenario);

struct ReplicationOptions {
    Index iterations = 5000;
    Index burn_in = 1000;
    bool select_L_by_dic = true;
    Index fixed_L = 10;  // basis size when the DIC search is off
    std::vector<Index> spline_sizes = default_spline_sizes();
    Index frequency_grid_size = 128;  // continuous constructed covariates
};

// Runs `replicates` simulated datasets through every method. Replicate r
// draws its data and chain seeds from Rng::for_replicate(seed, r), so the
// report is identical for any parallelism. Individual fit failures are
// recorded and excluded from the scores; more than 5% failures across all
// fits aborts the run.
ReplicationReport run_replication(const DiscreteScenario& scenario, const std::vector<DiscreteMethod>& methods,
                                  Index replicates, Index parallelism, std::uint64_t seed,
                                  const ReplicationOptions& options = {});
ReplicationReport run_replication(const ContinuousScenario& scenario, const std::vector<ContinuousMethod>& methods,
                                  Index replicates, Index parallelism, std::uint64_t seed,
                                  const ReplicationOptions& options = {});

// Summary table, one row per method; metric columns are scaled by 100 and
// paired with their Monte Carlo standard errors.
std::string report_csv(const ReplicationReport& report);

// Full report with per-replicate records as JSON.
std::string report_json(const ReplicationReport& report);

}  // namespace ecar
