#include "ecar/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace ecar {

Index PosteriorSamples::column(const std::string& name) const {
    for (Index j = 0; j < Index(names.size()); ++j)
        if (names[j] == name) return j;
    throw std::invalid_argument("no sampled parameter named " + name);
}

Vector PosteriorSamples::column_draws(const std::string& name) const { return draws.col(column(name)); }

double draw_quantile(Vector draws, double p) {
    require(draws.size() > 0, "quantile of empty draws");
    require(p >= 0.0 && p <= 1.0, "quantile level outside [0,1]");
    std::sort(draws.data(), draws.data() + draws.size());
    const double pos = p * double(draws.size() - 1);
    const Index lo = Index(std::floor(pos));
    const Index hi = std::min<Index>(lo + 1, draws.size() - 1);
    const double frac = pos - double(lo);
    return (1.0 - frac) * draws[lo] + frac * draws[hi];
}

ParameterSummary summarize_draws(const std::string& name, const Vector& draws, SummaryTransform t) {
    require(draws.size() > 0, "summary of empty draws");
    Vector v = t == SummaryTransform::exponential ? Vector(draws.array().exp()) : draws;
    ParameterSummary s;
    s.name = name;
    s.mean = v.mean();
    s.sd = v.size() > 1 ? std::sqrt((v.array() - s.mean).square().sum() / double(v.size() - 1)) : 0.0;
    s.lo95 = draw_quantile(v, 0.025);
    s.hi95 = draw_quantile(v, 0.975);
    return s;
}

std::vector<ParameterSummary> posterior_summary(const PosteriorSamples& samples, SummaryTransform t) {
    require(samples.draws.rows() > 0, "no retained draws");
    std::vector<ParameterSummary> out;
    out.reserve(samples.names.size());
    for (Index j = 0; j < Index(samples.names.size()); ++j)
        out.push_back(summarize_draws(samples.names[j], samples.draws.col(j), t));
    return out;
}

double effective_parameters(const PosteriorSamples& samples) {
    require(samples.deviance_draws.size() > 0, "fit recorded no deviance draws");
    const double mean_dev = samples.deviance_draws.mean();
    if (!std::isfinite(mean_dev) || !std::isfinite(samples.deviance_at_mean))
        throw numeric_error("non-finite deviance");
    return mean_dev - samples.deviance_at_mean;
}

double dic(const PosteriorSamples& samples) {
    const double mean_dev = samples.deviance_draws.mean();
    return mean_dev + effective_parameters(samples);
}

LSelection select_L(const std::vector<Index>& candidates, const std::function<PosteriorSamples(Index)>& fit_at_L) {
    require(!candidates.empty(), "no candidate basis sizes");
    LSelection sel;
    double best = std::numeric_limits<double>::infinity();
    for (Index L : candidates) {
        double d;
        try {
            d = dic(fit_at_L(L));
        } catch (const std::exception& e) {
            throw numeric_error("fit failed at L=" + std::to_string(L) + ": " + e.what());
        }
        sel.table.push_back({L, d});
        if (d < best) {
            best = d;
            sel.chosen_L = L;
        }
    }
    return sel;
}

std::vector<Index> default_spline_sizes() { return {1, 5, 10, 20, 30, 40}; }

}  // namespace ecar
