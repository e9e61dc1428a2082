// Command-line driver: fit the spatial-confounding adjustments to a dataset,
// simulate datasets from the study settings, run replication studies, and
// export the constructed adjustment covariates.
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ecar/adjacency.hpp"
#include "ecar/bspline.hpp"
#include "ecar/constructed.hpp"
#include "ecar/fit_continuous.hpp"
#include "ecar/fit_discrete.hpp"
#include "ecar/io.hpp"
#include "ecar/mcmc.hpp"
#include "ecar/replicate.hpp"
#include "ecar/rng.hpp"
#include "ecar/simulate.hpp"
#include "ecar/spectral_basis.hpp"
#include "ecar/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ecar;

namespace {

constexpr double kQLo = 0.025;
constexpr double kQHi = 0.975;

// ---------------------------------------------------------------------------
// shared plumbing

Index env_thread_cap() {
    const char* raw = std::getenv("ECAR_THREADS");
    if (raw == nullptr || *raw == '\0') return 0;
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    require(end != raw && *end == '\0' && v >= 1, "ECAR_THREADS must be a positive integer");
    return static_cast<Index>(v);
}

Index effective_parallelism(Index requested) {
    Index p = requested;
    if (p <= 0) p = static_cast<Index>(std::max(1u, std::thread::hardware_concurrency()));
    const Index cap = env_thread_cap();
    if (cap > 0) p = std::min(p, cap);
    return p;
}

fs::path prepare_out_dir(const std::string& out) {
    require(!out.empty(), "--out directory is required");
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, "cannot create output directory '" + out + "'");
    return dir;
}

double json_safe(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN(); }

// nlohmann rejects NaN/inf in dump(); route every float through this
json num(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

void write_json_file(const fs::path& path, const json& j) { write_text_file(path.string(), j.dump(2) + "\n"); }

// Every run records the resolved configuration, the seeds, and a fingerprint
// of each input file, so outputs can be traced back to their exact inputs.
void write_manifest(const fs::path& dir, const std::string& subcommand, const json& config,
                    const std::vector<std::string>& input_paths, const std::vector<std::string>& outputs) {
    json inputs = json::object();
    for (const auto& p : input_paths) inputs[p] = content_fingerprint(read_text_file(p));
    json m;
    m["subcommand"] = subcommand;
    m["config"] = config;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    write_json_file(dir / "manifest.json", m);
}

std::vector<Index> parse_size_menu(const std::string& csv) {
    std::vector<Index> sizes;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        char* end = nullptr;
        const long v = std::strtol(tok.c_str(), &end, 10);
        require(end != tok.c_str() && *end == '\0' && v >= 1, "bad basis size '" + tok + "'");
        sizes.push_back(static_cast<Index>(v));
    }
    require(!sizes.empty(), "the basis-size menu is empty");
    return sizes;
}

// ---------------------------------------------------------------------------
// posterior post-processing

struct CurveRow {
    double omega, mean, lo, hi;
};

std::vector<CurveRow> constant_curve(const Vector& grid, const PosteriorSamples& samples) {
    const auto s = summarize_draws("beta_x", samples.column_draws("beta_x"));
    std::vector<CurveRow> rows(static_cast<std::size_t>(grid.size()));
    for (Index k = 0; k < grid.size(); ++k) rows[static_cast<std::size_t>(k)] = {grid[k], s.mean, s.lo95, s.hi95};
    return rows;
}

// beta(omega) pointwise over the grid from the spline-coefficient draws;
// add_beta_x marks the continuous parameterization where the adjustment sits
// on top of a global coefficient.
std::vector<CurveRow> spline_curve(const Vector& grid, const PosteriorSamples& samples, const BSplineBasis& spline,
                                   bool add_beta_x) {
    const Index L = spline.size();
    const Index R = samples.retained();
    Matrix coef(R, L);
    for (Index l = 0; l < L; ++l) coef.col(l) = samples.column_draws("b_" + std::to_string(l + 1));
    Vector base = add_beta_x ? Vector(samples.column_draws("beta_x")) : Vector(Vector::Zero(R));

    std::vector<CurveRow> rows(static_cast<std::size_t>(grid.size()));
    for (Index k = 0; k < grid.size(); ++k) {
        const Vector w = spline.evaluate_all(grid[k]);
        Vector values = base + coef * w;
        const double mean = values.mean();
        rows[static_cast<std::size_t>(k)] = {grid[k], mean, draw_quantile(values, kQLo), draw_quantile(values, kQHi)};
    }
    return rows;
}

void write_curve_csv(const fs::path& path, const std::vector<CurveRow>& rows) {
    Matrix values(static_cast<Index>(rows.size()), 4);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        values(static_cast<Index>(i), 0) = rows[i].omega;
        values(static_cast<Index>(i), 1) = rows[i].mean;
        values(static_cast<Index>(i), 2) = rows[i].lo;
        values(static_cast<Index>(i), 3) = rows[i].hi;
    }
    write_csv_table(path.string(), {"omega", "mean", "lo95", "hi95"}, values);
}

json curve_json(const std::vector<CurveRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back({{"omega", num(r.omega)}, {"mean", num(r.mean)}, {"lo95", num(r.lo)}, {"hi95", num(r.hi)}});
    return arr;
}

// split-half (single chain) or between-chain potential scale reduction
double rhat(const std::vector<Vector>& chains) {
    Index n = chains.front().size();
    for (const auto& c : chains) n = std::min(n, c.size());
    if (n < 4) return std::numeric_limits<double>::quiet_NaN();
    std::vector<Vector> parts;
    if (chains.size() == 1) {
        parts.push_back(chains[0].head(n / 2));
        parts.push_back(chains[0].tail(n / 2));
        n = n / 2;
    } else {
        for (const auto& c : chains) parts.push_back(c.head(n));
    }
    const double m = static_cast<double>(parts.size());
    double w = 0.0;
    Vector means(static_cast<Index>(parts.size()));
    for (std::size_t j = 0; j < parts.size(); ++j) {
        const double mu = parts[j].mean();
        means[static_cast<Index>(j)] = mu;
        w += (parts[j].array() - mu).square().sum() / static_cast<double>(n - 1);
    }
    w /= m;
    const double grand = means.mean();
    const double b_over_n = (means.array() - grand).square().sum() / (m - 1.0);
    if (w <= 0.0) return 1.0;
    const double var_plus = (static_cast<double>(n - 1) / static_cast<double>(n)) * w + b_over_n;
    return std::sqrt(var_plus / w);
}

PosteriorSamples pool_chains(const std::vector<PosteriorSamples>& chains) {
    if (chains.size() == 1) return chains.front();
    Index rows = 0;
    for (const auto& c : chains) rows += c.retained();
    PosteriorSamples out = chains.front();
    out.draws.resize(rows, chains.front().draws.cols());
    out.deviance_draws.resize(rows);
    Index at = 0;
    double dev_mean = 0.0;
    for (const auto& c : chains) {
        require(c.names == out.names, "chains disagree on parameter columns");
        out.draws.middleRows(at, c.retained()) = c.draws;
        out.deviance_draws.segment(at, c.retained()) = c.deviance_draws;
        at += c.retained();
        dev_mean += c.deviance_at_mean;
    }
    // mean of the per-chain plug-in deviances; each estimates the same point
    out.deviance_at_mean = dev_mean / static_cast<double>(chains.size());
    return out;
}

json diagnostics_json(const std::vector<PosteriorSamples>& chains, const PosteriorSamples& pooled,
                      const McmcConfig& base) {
    json d;
    d["iterations"] = base.iterations;
    d["burn_in"] = base.burn_in;
    d["seed"] = base.seed;
    d["chains"] = chains.size();
    d["retained"] = pooled.retained();
    const bool has_dev = pooled.deviance_draws.size() > 0 && std::isfinite(pooled.deviance_at_mean);
    d["dic"] = has_dev ? num(dic(pooled)) : json(nullptr);
    d["effective_parameters"] = has_dev ? num(effective_parameters(pooled)) : json(nullptr);
    json rh = json::object();
    for (const auto& name : pooled.names) {
        std::vector<Vector> cols;
        for (const auto& c : chains) cols.push_back(c.column_draws(name));
        rh[name] = num(rhat(cols));
    }
    d["rhat"] = rh;
    return d;
}

json summaries_json(const PosteriorSamples& pooled) {
    json arr = json::array();
    for (const auto& s : posterior_summary(pooled))
        arr.push_back({{"name", s.name}, {"mean", num(s.mean)}, {"sd", num(s.sd)}, {"lo95", num(s.lo95)}, {"hi95", num(s.hi95)}});
    return arr;
}

json dic_table_json(const LSelection& sel) {
    json arr = json::array();
    for (const auto& row : sel.table) arr.push_back({{"L", row.L}, {"dic", num(row.dic)}});
    return arr;
}

void write_dic_csv(const fs::path& path, const LSelection& sel) {
    Matrix values(static_cast<Index>(sel.table.size()), 2);
    for (std::size_t i = 0; i < sel.table.size(); ++i) {
        values(static_cast<Index>(i), 0) = static_cast<double>(sel.table[i].L);
        values(static_cast<Index>(i), 1) = sel.table[i].dic;
    }
    write_csv_table(path.string(), {"L", "dic"}, values);
}

// ---------------------------------------------------------------------------
// continuous-site geometry: frequency cutoff and quadrature cell area from
// the nearest-neighbor spacing (exact for grid data)

struct SiteGeometry {
    double omega_max;
    double cell_area;
};

SiteGeometry site_geometry(const Matrix& sites) {
    const Index n = sites.rows();
    require(n >= 2, "need at least two sites");
    Vector nearest(n);
    for (Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            best = std::min(best, (sites.row(i) - sites.row(j)).norm());
        }
        nearest[i] = best;
    }
    const double max_spacing = nearest.maxCoeff();
    require(max_spacing > 0.0, "duplicate site coordinates");
    std::sort(nearest.data(), nearest.data() + n);
    const double median = n % 2 == 1 ? nearest[n / 2] : 0.5 * (nearest[n / 2 - 1] + nearest[n / 2]);
    return {M_PI / max_spacing, median * median};
}

// ---------------------------------------------------------------------------
// fit subcommand

struct FitConfig {
    std::string data_path;
    std::string adjacency_path;
    std::string domain = "discrete";
    std::string method;
    std::string family = "gaussian";
    std::string variant;
    Index fixed_L = 0;           // 0 = not set
    std::string menu_csv;        // "" = not set
    Index frequency_grid = 128;
    Index iterations = 25000;
    Index burn_in = 5000;
    std::uint64_t seed = 1;
    Index chains = 1;
    std::string out;
};

std::vector<Index> fit_size_menu(const FitConfig& cfg, bool* selecting) {
    require(cfg.fixed_L == 0 || cfg.menu_csv.empty(), "--L and --L-menu are mutually exclusive");
    if (cfg.fixed_L > 0) {
        *selecting = false;
        return {cfg.fixed_L};
    }
    *selecting = true;
    return cfg.menu_csv.empty() ? default_spline_sizes() : parse_size_menu(cfg.menu_csv);
}

McmcConfig chain_config(const FitConfig& cfg, Index chain) {
    McmcConfig mcmc;
    mcmc.iterations = cfg.iterations;
    mcmc.burn_in = cfg.burn_in;
    mcmc.seed = cfg.seed + static_cast<std::uint64_t>(chain);
    mcmc.validate();
    return mcmc;
}

// Everything the fit writers need, whatever the model family.
struct FitProduct {
    std::vector<PosteriorSamples> chains;
    PosteriorSamples pooled;
    std::vector<CurveRow> curve;
    LSelection selection;
    bool selected = false;
    Index chosen_L = 0;
    bool collinear = false;
    bool has_collinear_flag = false;
    Vector latent_mean;  // GLM latent field posterior mean (empty otherwise)
};

FitProduct run_discrete_gaussian_fit(const FitConfig& cfg, const CsvTable& table, const SpectralBasis& basis) {
    const auto data = make_spectral_data(basis, table.column("y"), table.column("x"));
    FitProduct out;

    if (cfg.method == "standard" || cfg.method == "parametric") {
        const auto prior = cfg.method == "standard" ? PriorConfig::standard_gaussian() : PriorConfig::parsimonious_car();
        for (Index c = 0; c < cfg.chains; ++c) {
            const auto mcmc = chain_config(cfg, c);
            out.chains.push_back(cfg.method == "standard" ? fit_standard_gaussian(data, prior, mcmc)
                                                          : fit_parsimonious_car(data, prior, mcmc));
        }
        out.pooled = pool_chains(out.chains);
        out.curve = constant_curve(data.omega, out.pooled);
        return out;
    }

    require(cfg.method == "semiparametric", "unknown method '" + cfg.method + "'");
    require(cfg.variant.empty() || cfg.variant == "pcp" || cfg.variant == "r2d2",
            "semiparametric --variant must be pcp or r2d2");
    const auto prior = PriorConfig::semiparametric(cfg.variant == "r2d2");
    const double lo = data.omega[0];
    const double hi = data.omega[data.n() - 1];
    auto fit_at = [&](Index L, const McmcConfig& mcmc) {
        const BSplineBasis spline(L, 3, lo, hi);
        const auto covs = constructed_covariates_discrete(basis, spline, table.column("x"));
        return fit_semiparametric_gaussian(data, covs, prior, mcmc);
    };

    bool selecting = false;
    const auto menu = fit_size_menu(cfg, &selecting);
    Index L = menu.front();
    if (menu.size() > 1) {
        out.selection = select_L(menu, [&](Index cand) { return fit_at(cand, chain_config(cfg, 0)); });
        out.selected = true;
        L = out.selection.chosen_L;
    }
    out.chosen_L = L;
    for (Index c = 0; c < cfg.chains; ++c) out.chains.push_back(fit_at(L, chain_config(cfg, c)));
    out.pooled = pool_chains(out.chains);
    out.curve = spline_curve(data.omega, out.pooled, BSplineBasis(L, 3, lo, hi), false);
    return out;
}

FitProduct run_discrete_glm_fit(const FitConfig& cfg, const CsvTable& table, const AdjacencyGraph& graph,
                                const SpectralBasis& basis) {
    require(cfg.method == "standard" || cfg.method == "semiparametric",
            "count families support the standard and semiparametric methods");
    GlmData data;
    data.y = table.column("y");
    data.offset = table.has("offset") ? Vector(table.column("offset")) : Vector(Vector::Ones(table.rows()));
    data.family = cfg.family == "poisson" ? GlmFamily::poisson : GlmFamily::negbin;
    std::vector<Index> cov_cols;
    for (Index k = 1; table.has("c" + std::to_string(k)); ++k) cov_cols.push_back(table.column_index("c" + std::to_string(k)));
    data.covariates.resize(table.rows(), static_cast<Index>(cov_cols.size()));
    for (std::size_t j = 0; j < cov_cols.size(); ++j) data.covariates.col(static_cast<Index>(j)) = table.values.col(cov_cols[j]);

    require(cfg.variant.empty() || cfg.variant == "pcp" || cfg.variant == "r2d2",
            "semiparametric --variant must be pcp or r2d2");
    const auto prior = PriorConfig::semiparametric(cfg.variant == "r2d2");
    const Vector x = table.column("x");
    const double lo = basis.omega[0];
    const double hi = basis.omega[basis.n() - 1];
    auto fit_at = [&](Index L, const McmcConfig& mcmc) {
        const BSplineBasis spline(L, 3, lo, hi);
        const auto covs = constructed_covariates_discrete(basis, spline, x);
        return fit_glm_car(data, graph, basis, covs, prior, mcmc);
    };

    FitProduct out;
    Index L = 1;  // constant-coefficient fallback reproduces the unadjusted model
    if (cfg.method == "semiparametric") {
        bool selecting = false;
        const auto menu = fit_size_menu(cfg, &selecting);
        L = menu.front();
        if (menu.size() > 1) {
            out.selection = select_L(menu, [&](Index cand) { return fit_at(cand, chain_config(cfg, 0)).samples; });
            out.selected = true;
            L = out.selection.chosen_L;
        }
    }
    out.chosen_L = cfg.method == "semiparametric" ? L : 0;

    Vector latent_sum;
    for (Index c = 0; c < cfg.chains; ++c) {
        auto fit = fit_at(L, chain_config(cfg, c));
        if (c == 0)
            latent_sum = fit.theta_mean;
        else
            latent_sum += fit.theta_mean;
        out.chains.push_back(std::move(fit.samples));
    }
    out.latent_mean = latent_sum / static_cast<double>(cfg.chains);
    out.pooled = pool_chains(out.chains);
    const BSplineBasis spline(L, 3, lo, hi);
    out.curve = cfg.method == "semiparametric" ? spline_curve(basis.omega, out.pooled, spline, false)
                                               : constant_curve(basis.omega, out.pooled);
    return out;
}

FitProduct run_continuous_fit(const FitConfig& cfg, const CsvTable& table) {
    const Index n = table.rows();
    Matrix sites(n, 2);
    sites.col(0) = table.column("s1");
    sites.col(1) = table.column("s2");
    const Vector x = table.column("x");
    const Vector y = table.column("y");
    const auto plugin = fit_matern_mle_x(x, sites);
    const ContinuousPriorConfig prior;
    FitProduct out;
    out.has_collinear_flag = true;

    const auto geom = site_geometry(sites);
    const Vector grid = FrequencyGrid::midpoint(cfg.frequency_grid, geom.omega_max).omega;

    if (cfg.method == "standard" || cfg.method == "parametric") {
        std::string variant = cfg.variant;
        if (cfg.method == "parametric") {
            if (variant.empty()) variant = "flexible";
            require(variant == "flexible" || variant == "parsimonious",
                    "parametric --variant must be flexible or parsimonious");
        } else {
            require(variant.empty(), "--variant does not apply to the standard method");
        }
        for (Index c = 0; c < cfg.chains; ++c) {
            const auto mcmc = chain_config(cfg, c);
            ContinuousFit fit = cfg.method == "standard" ? fit_standard_matern(y, x, sites, plugin, prior, mcmc)
                                : variant == "flexible"  ? fit_flexible_matern(y, x, sites, plugin, prior, mcmc)
                                                         : fit_parsimonious_matern(y, x, sites, plugin, prior, mcmc);
            out.collinear = out.collinear || fit.collinear_adjustment;
            out.chains.push_back(std::move(fit.samples));
        }
        out.pooled = pool_chains(out.chains);
        out.curve = constant_curve(grid, out.pooled);
        return out;
    }

    require(cfg.method == "semiparametric", "unknown method '" + cfg.method + "'");
    require(cfg.variant.empty(), "--variant does not apply to the continuous semiparametric method");
    const auto freq = FrequencyGrid::midpoint(cfg.frequency_grid, geom.omega_max);
    auto fit_at = [&](Index L, const McmcConfig& mcmc) {
        const BSplineBasis spline(L, 3, 0.0, geom.omega_max);
        const auto covs = constructed_covariates_continuous(sites, x, spline, freq, geom.cell_area);
        return fit_semiparametric_continuous(y, x, sites, covs, plugin, prior, mcmc);
    };

    bool selecting = false;
    const auto menu = fit_size_menu(cfg, &selecting);
    Index L = menu.front();
    if (menu.size() > 1) {
        out.selection = select_L(menu, [&](Index cand) { return fit_at(cand, chain_config(cfg, 0)).samples; });
        out.selected = true;
        L = out.selection.chosen_L;
    }
    out.chosen_L = L;
    for (Index c = 0; c < cfg.chains; ++c) {
        auto fit = fit_at(L, chain_config(cfg, c));
        out.collinear = out.collinear || fit.collinear_adjustment;
        out.chains.push_back(std::move(fit.samples));
    }
    out.pooled = pool_chains(out.chains);
    out.curve = spline_curve(grid, out.pooled, BSplineBasis(L, 3, 0.0, geom.omega_max), true);
    return out;
}

int run_fit(const FitConfig& cfg) {
    require(cfg.domain == "discrete" || cfg.domain == "continuous", "--domain must be discrete or continuous");
    require(cfg.family == "gaussian" || cfg.family == "poisson" || cfg.family == "negbin",
            "--family must be gaussian, poisson, or negbin");
    require(cfg.family == "gaussian" || cfg.domain == "discrete", "count families require the discrete domain");
    require(cfg.burn_in < cfg.iterations, "burn-in must be shorter than the chain");
    require(cfg.chains >= 1, "--chains must be positive");

    const auto table = read_csv_table(cfg.data_path);
    const auto dir = prepare_out_dir(cfg.out);
    std::vector<std::string> inputs = {cfg.data_path};

    FitProduct product;
    if (cfg.domain == "continuous") {
        require(cfg.adjacency_path.empty(), "--adjacency only applies to the discrete domain");
        product = run_continuous_fit(cfg, table);
    } else {
        require(!cfg.adjacency_path.empty(), "discrete fits require --adjacency");
        inputs.push_back(cfg.adjacency_path);
        const auto graph = read_edge_list(cfg.adjacency_path, table.rows());
        const auto basis = spectral_basis_of(graph);
        product = cfg.family == "gaussian" ? run_discrete_gaussian_fit(cfg, table, basis)
                                           : run_discrete_glm_fit(cfg, table, graph, basis);
    }

    json model;
    model["domain"] = cfg.domain;
    model["family"] = cfg.family;
    model["method"] = cfg.method;
    if (!cfg.variant.empty()) model["variant"] = cfg.variant;
    if (product.chosen_L > 0) model["L"] = product.chosen_L;

    json doc;
    doc["model"] = model;
    doc["parameters"] = summaries_json(product.pooled);
    doc["curve"] = curve_json(product.curve);
    if (product.selected) doc["dic_table"] = dic_table_json(product.selection);
    McmcConfig base;
    base.iterations = cfg.iterations, base.burn_in = cfg.burn_in, base.seed = cfg.seed;
    doc["diagnostics"] = diagnostics_json(product.chains, product.pooled, base);
    if (product.has_collinear_flag) doc["collinear_adjustment"] = product.collinear;
    if (product.latent_mean.size() > 0) {
        json lat = json::array();
        for (Index i = 0; i < product.latent_mean.size(); ++i) lat.push_back(json_safe(product.latent_mean[i]));
        doc["latent_field_mean"] = lat;
    }

    std::vector<std::string> outputs = {"posterior.json", "curve.csv"};
    write_json_file(dir / "posterior.json", doc);
    write_curve_csv(dir / "curve.csv", product.curve);
    if (product.selected) {
        write_dic_csv(dir / "dic.csv", product.selection);
        outputs.push_back("dic.csv");
    }

    json config;
    config["data"] = cfg.data_path;
    if (!cfg.adjacency_path.empty()) config["adjacency"] = cfg.adjacency_path;
    config["domain"] = cfg.domain, config["family"] = cfg.family, config["method"] = cfg.method;
    if (!cfg.variant.empty()) config["variant"] = cfg.variant;
    config["iterations"] = cfg.iterations, config["burn_in"] = cfg.burn_in;
    config["seed"] = cfg.seed, config["chains"] = cfg.chains;
    if (product.chosen_L > 0) config["L"] = product.chosen_L;
    write_manifest(dir, "fit", config, inputs, outputs);
    return 0;
}

// ---------------------------------------------------------------------------
// simulate subcommand

struct SimulateConfig {
    std::string domain = "discrete";
    int scenario = 1;
    double phi_override = std::numeric_limits<double>::quiet_NaN();
    double beta_xz_override = std::numeric_limits<double>::quiet_NaN();
    Index rows = 0, cols = 0;
    std::uint64_t seed = 1;
    std::string out;
};

int run_simulate(const SimulateConfig& cfg) {
    require(cfg.domain == "discrete" || cfg.domain == "continuous", "--domain must be discrete or continuous");
    const auto dir = prepare_out_dir(cfg.out);

    json truth;
    truth["domain"] = cfg.domain;
    truth["scenario"] = cfg.scenario;
    truth["seed"] = cfg.seed;
    std::vector<std::string> outputs;

    if (cfg.domain == "discrete") {
        DiscreteScenario s = discrete_scenario(cfg.scenario);
        if (std::isfinite(cfg.phi_override)) s.phi = cfg.phi_override;
        if (std::isfinite(cfg.beta_xz_override)) s.beta_xz = cfg.beta_xz_override;
        if (cfg.rows > 0) s.rows = cfg.rows;
        if (cfg.cols > 0) s.cols = cfg.cols;

        const auto graph = build_lattice_adjacency(s.rows, s.cols);
        const auto basis = spectral_basis_of(graph);
        const auto fields = DiscreteSimulator(s, basis).draw(cfg.seed);

        Matrix data(fields.y.size(), 3);
        data.col(0) = fields.y, data.col(1) = fields.x, data.col(2) = fields.z;
        write_csv_table((dir / "data.csv").string(), {"y", "x", "z"}, data);

        std::ostringstream edges;
        for (const auto& e : graph.edges) edges << (e.first + 1) << ' ' << (e.second + 1) << '\n';
        write_text_file((dir / "edges.txt").string(), edges.str());

        truth["rows"] = s.rows, truth["cols"] = s.cols, truth["n"] = s.rows * s.cols;
        truth["beta_x"] = s.beta_x, truth["beta_z"] = s.beta_z, truth["beta_xz"] = s.beta_xz;
        truth["phi"] = s.phi, truth["lambda"] = s.lambda;
        truth["sigma_x2"] = s.sigma_x2, truth["sigma_z2"] = s.sigma_z2, truth["sigma2"] = s.sigma2;
        outputs = {"data.csv", "edges.txt", "truth.json"};
    } else {
        ContinuousScenario s = continuous_scenario(cfg.scenario);
        if (std::isfinite(cfg.phi_override)) s.phi = cfg.phi_override;
        if (std::isfinite(cfg.beta_xz_override)) s.beta_xz = cfg.beta_xz_override;
        if (cfg.rows > 0) s.rows = cfg.rows;
        if (cfg.cols > 0) s.cols = cfg.cols;

        const ContinuousSimulator sim(s);
        const auto fields = sim.draw(cfg.seed);
        const Matrix& sites = sim.sites();

        Matrix data(fields.y.size(), 5);
        data.col(0) = sites.col(0), data.col(1) = sites.col(1);
        data.col(2) = fields.x, data.col(3) = fields.y, data.col(4) = fields.z;
        write_csv_table((dir / "data.csv").string(), {"s1", "s2", "x", "y", "z"}, data);

        truth["rows"] = s.rows, truth["cols"] = s.cols, truth["n"] = s.rows * s.cols;
        truth["beta_x"] = s.beta_x, truth["beta_z"] = s.beta_z, truth["beta_xz"] = s.beta_xz;
        truth["phi"] = s.phi;
        truth["phi_x"] = s.phi_x, truth["phi_z"] = s.phi_z, truth["nu_x"] = s.nu_x, truth["nu_z"] = s.nu_z;
        truth["sigma_x2"] = s.sigma_x2, truth["sigma_z2"] = s.sigma_z2, truth["sigma2"] = s.sigma2;
        outputs = {"data.csv", "truth.json"};
    }
    write_json_file(dir / "truth.json", truth);

    json config;
    config["domain"] = cfg.domain, config["scenario"] = cfg.scenario, config["seed"] = cfg.seed;
    if (std::isfinite(cfg.phi_override)) config["phi"] = cfg.phi_override;
    if (std::isfinite(cfg.beta_xz_override)) config["beta_xz"] = cfg.beta_xz_override;
    if (cfg.rows > 0) config["rows"] = cfg.rows;
    if (cfg.cols > 0) config["cols"] = cfg.cols;
    write_manifest(dir, "simulate", config, {}, outputs);
    return 0;
}

// ---------------------------------------------------------------------------
// replicate subcommand

struct ReplicateConfig {
    std::string domain = "discrete";
    int scenario = 0;  // 0 = not set
    int table = 0;     // 0 = not set
    std::string methods_csv;
    Index reps = 0;  // 0 = domain default
    Index parallel = 0;
    Index iterations = 5000;
    Index burn_in = 1000;
    bool full_chains = false;
    Index fixed_L = 0;
    Index frequency_grid = 128;
    std::uint64_t seed = 1;
    std::string out;
};

std::vector<std::string> split_csv_names(const std::string& csv) {
    std::vector<std::string> names;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) names.push_back(tok);
    }
    return names;
}

std::vector<DiscreteMethod> discrete_methods(const std::string& csv) {
    if (csv.empty())
        return {DiscreteMethod::standard, DiscreteMethod::parametric, DiscreteMethod::semiparametric_pcp,
                DiscreteMethod::semiparametric_r2d2};
    std::vector<DiscreteMethod> out;
    for (const auto& name : split_csv_names(csv)) {
        if (name == "standard")
            out.push_back(DiscreteMethod::standard);
        else if (name == "parametric")
            out.push_back(DiscreteMethod::parametric);
        else if (name == "semiparametric_pcp" || name == "semiparametric")
            out.push_back(DiscreteMethod::semiparametric_pcp);
        else if (name == "semiparametric_r2d2")
            out.push_back(DiscreteMethod::semiparametric_r2d2);
        else
            require(false, "unknown discrete method '" + name + "'");
    }
    return out;
}

std::vector<ContinuousMethod> continuous_methods(const std::string& csv) {
    if (csv.empty())
        return {ContinuousMethod::standard, ContinuousMethod::flexible, ContinuousMethod::parsimonious,
                ContinuousMethod::semiparametric};
    std::vector<ContinuousMethod> out;
    for (const auto& name : split_csv_names(csv)) {
        if (name == "standard")
            out.push_back(ContinuousMethod::standard);
        else if (name == "flexible")
            out.push_back(ContinuousMethod::flexible);
        else if (name == "parsimonious")
            out.push_back(ContinuousMethod::parsimonious);
        else if (name == "semiparametric")
            out.push_back(ContinuousMethod::semiparametric);
        else
            require(false, "unknown continuous method '" + name + "'");
    }
    return out;
}

// one header plus the body rows of every report
std::string merge_report_csv(const std::vector<std::string>& csvs) {
    std::string merged;
    for (std::size_t i = 0; i < csvs.size(); ++i) {
        std::stringstream ss(csvs[i]);
        std::string line;
        bool first = true;
        while (std::getline(ss, line)) {
            if (first && i > 0) {
                first = false;
                continue;
            }
            first = false;
            merged += line + "\n";
        }
    }
    return merged;
}

int run_replicate(const ReplicateConfig& cfg) {
    require(cfg.table == 0 || cfg.scenario == 0, "--table and --scenario are mutually exclusive");
    require(cfg.table == 0 || cfg.table == 1 || cfg.table == 2, "--table must be 1 or 2");

    std::string domain = cfg.domain;
    if (cfg.table == 1) domain = "discrete";
    if (cfg.table == 2) domain = "continuous";
    require(domain == "discrete" || domain == "continuous", "--domain must be discrete or continuous");

    std::vector<int> scenarios;
    if (cfg.table != 0)
        scenarios = {1, 2, 3, 4, 5};
    else
        scenarios = {cfg.scenario == 0 ? 1 : cfg.scenario};

    ReplicationOptions options;
    options.iterations = cfg.full_chains ? 25000 : cfg.iterations;
    options.burn_in = cfg.full_chains ? 5000 : cfg.burn_in;
    options.frequency_grid_size = cfg.frequency_grid;
    if (cfg.fixed_L > 0) {
        options.select_L_by_dic = false;
        options.fixed_L = cfg.fixed_L;
    }
    const Index reps = cfg.reps > 0 ? cfg.reps : (domain == "discrete" ? 100 : 50);
    const Index parallel = effective_parallelism(cfg.parallel);

    const auto dir = prepare_out_dir(cfg.out);
    std::vector<std::string> csvs;
    json raw = json::array();
    for (const int sc : scenarios) {
        ReplicationReport report;
        if (domain == "discrete")
            report = run_replication(discrete_scenario(sc), discrete_methods(cfg.methods_csv), reps, parallel,
                                     cfg.seed + static_cast<std::uint64_t>(1000 * sc), options);
        else
            report = run_replication(continuous_scenario(sc), continuous_methods(cfg.methods_csv), reps, parallel,
                                     cfg.seed + static_cast<std::uint64_t>(1000 * sc), options);
        report.scenario = domain + "-" + std::to_string(sc);
        csvs.push_back(report_csv(report));
        raw.push_back(json::parse(report_json(report)));
    }

    write_text_file((dir / "table.csv").string(), merge_report_csv(csvs));
    write_json_file(dir / "raw.json", raw);

    json config;
    config["domain"] = domain;
    if (cfg.table != 0) config["table"] = cfg.table;
    config["scenarios"] = scenarios;
    config["methods"] = cfg.methods_csv.empty() ? "all" : cfg.methods_csv;
    config["replicates"] = reps, config["parallel"] = parallel;
    config["iterations"] = options.iterations, config["burn_in"] = options.burn_in;
    config["seed"] = cfg.seed;
    if (cfg.fixed_L > 0) config["L"] = cfg.fixed_L;
    write_manifest(dir, "replicate", config, {}, {"table.csv", "raw.json"});
    return 0;
}

// ---------------------------------------------------------------------------
// basis subcommand

struct BasisConfig {
    std::string data_path;
    std::string adjacency_path;
    std::string domain = "discrete";
    Index L = 10;
    Index frequency_grid = 128;
    std::string out;
};

int run_basis(const BasisConfig& cfg) {
    require(cfg.domain == "discrete" || cfg.domain == "continuous", "--domain must be discrete or continuous");
    require(cfg.L >= 1, "--L must be positive");
    const auto table = read_csv_table(cfg.data_path);
    const auto dir = prepare_out_dir(cfg.out);
    std::vector<std::string> inputs = {cfg.data_path};

    Matrix columns;
    if (cfg.domain == "discrete") {
        require(!cfg.adjacency_path.empty(), "discrete covariates require --adjacency");
        inputs.push_back(cfg.adjacency_path);
        const auto graph = read_edge_list(cfg.adjacency_path, table.rows());
        const auto basis = spectral_basis_of(graph);
        const BSplineBasis spline(cfg.L, 3, basis.omega[0], basis.omega[basis.n() - 1]);
        columns = constructed_covariates_discrete(basis, spline, table.column("x")).columns;
    } else {
        require(cfg.adjacency_path.empty(), "--adjacency only applies to the discrete domain");
        Matrix sites(table.rows(), 2);
        sites.col(0) = table.column("s1");
        sites.col(1) = table.column("s2");
        const auto geom = site_geometry(sites);
        const auto freq = FrequencyGrid::midpoint(cfg.frequency_grid, geom.omega_max);
        const BSplineBasis spline(cfg.L, 3, 0.0, geom.omega_max);
        columns = constructed_covariates_continuous(sites, table.column("x"), spline, freq, geom.cell_area).columns;
    }

    std::vector<std::string> names;
    for (Index l = 1; l <= cfg.L; ++l) names.push_back("Z" + std::to_string(l));
    write_csv_table((dir / "covariates.csv").string(), names, columns);

    json config;
    config["data"] = cfg.data_path;
    if (!cfg.adjacency_path.empty()) config["adjacency"] = cfg.adjacency_path;
    config["domain"] = cfg.domain, config["L"] = cfg.L;
    write_manifest(dir, "basis", config, inputs, {"covariates.csv"});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral adjustment for unmeasured spatial confounding"};
    app.require_subcommand(1);

    FitConfig fit;
    auto* cmd_fit = app.add_subcommand("fit", "Fit a model to a dataset");
    cmd_fit->add_option("--data", fit.data_path, "input CSV")->required();
    cmd_fit->add_option("--adjacency", fit.adjacency_path, "edge list (discrete domain)");
    cmd_fit->add_option("--domain", fit.domain, "discrete|continuous");
    cmd_fit->add_option("--method", fit.method, "standard|parametric|semiparametric")->required();
    cmd_fit->add_option("--family", fit.family, "gaussian|poisson|negbin");
    cmd_fit->add_option("--variant", fit.variant, "pcp|r2d2 (discrete semi), flexible|parsimonious (continuous parametric)");
    cmd_fit->add_option("--L", fit.fixed_L, "fixed basis size");
    cmd_fit->add_option("--L-menu", fit.menu_csv, "comma-separated basis sizes for the DIC search");
    cmd_fit->add_option("--frequency-grid", fit.frequency_grid, "quadrature grid size (continuous)");
    cmd_fit->add_option("--iterations", fit.iterations, "MCMC iterations");
    cmd_fit->add_option("--burn-in", fit.burn_in, "burn-in iterations");
    cmd_fit->add_option("--seed", fit.seed, "RNG seed");
    cmd_fit->add_option("--chains", fit.chains, "independent chains (seeded seed, seed+1, ...)");
    cmd_fit->add_option("--out", fit.out, "output directory")->required();

    SimulateConfig sim;
    auto* cmd_sim = app.add_subcommand("simulate", "Draw one dataset from a study setting");
    cmd_sim->add_option("--domain", sim.domain, "discrete|continuous");
    cmd_sim->add_option("--scenario", sim.scenario, "study setting 1-5");
    cmd_sim->add_option("--phi", sim.phi_override, "override the smoothing bandwidth");
    cmd_sim->add_option("--beta-xz", sim.beta_xz_override, "override the confounding loading");
    cmd_sim->add_option("--rows", sim.rows, "grid rows");
    cmd_sim->add_option("--cols", sim.cols, "grid columns");
    cmd_sim->add_option("--seed", sim.seed, "RNG seed");
    cmd_sim->add_option("--out", sim.out, "output directory")->required();

    ReplicateConfig rep;
    auto* cmd_rep = app.add_subcommand("replicate", "Replicated operating characteristics");
    cmd_rep->add_option("--domain", rep.domain, "discrete|continuous");
    cmd_rep->add_option("--scenario", rep.scenario, "single study setting 1-5");
    cmd_rep->add_option("--table", rep.table, "1 (discrete) or 2 (continuous): all five settings");
    cmd_rep->add_option("--methods", rep.methods_csv, "comma-separated method list (default: all four)");
    cmd_rep->add_option("--reps", rep.reps, "replicates (default 100 discrete, 50 continuous)");
    cmd_rep->add_option("--parallel", rep.parallel, "worker threads (default: hardware)");
    cmd_rep->add_option("--iterations", rep.iterations, "MCMC iterations per fit");
    cmd_rep->add_option("--burn-in", rep.burn_in, "burn-in iterations");
    cmd_rep->add_flag("--full-chains", rep.full_chains, "use 25000/5000 chains");
    cmd_rep->add_option("--L", rep.fixed_L, "fixed basis size (skips the DIC search)");
    cmd_rep->add_option("--frequency-grid", rep.frequency_grid, "quadrature grid size (continuous)");
    cmd_rep->add_option("--seed", rep.seed, "RNG seed");
    cmd_rep->add_option("--out", rep.out, "output directory")->required();

    BasisConfig basis;
    auto* cmd_basis = app.add_subcommand("basis", "Export the constructed adjustment covariates");
    cmd_basis->add_option("--data", basis.data_path, "input CSV")->required();
    cmd_basis->add_option("--adjacency", basis.adjacency_path, "edge list (discrete domain)");
    cmd_basis->add_option("--domain", basis.domain, "discrete|continuous");
    cmd_basis->add_option("--L", basis.L, "basis size")->required();
    cmd_basis->add_option("--frequency-grid", basis.frequency_grid, "quadrature grid size (continuous)");
    cmd_basis->add_option("--out", basis.out, "output directory")->required();

    try {
        app.parse(argc, argv);
        if (cmd_fit->parsed()) return run_fit(fit);
        if (cmd_sim->parsed()) return run_simulate(sim);
        if (cmd_rep->parsed()) return run_replicate(rep);
        return run_basis(basis);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::ignore = app.exit(e);
        return 2;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
