#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ecar/types.hpp"

namespace ecar {

struct McmcConfig {
    Index iterations = 25000;
    Index burn_in = 5000;
    std::uint64_t seed = 1;
    // optional by-name starting values (parameters named as in the output
    // columns); anything not listed starts from the built-in defaults
    std::vector<std::pair<std::string, double>> init;

    void validate() const {
        require(iterations >= 1, "need at least one iteration");
        require(burn_in >= 0 && burn_in < iterations, "burn-in must be shorter than the chain");
    }
    Index retained() const { return iterations - burn_in; }
    double init_or(const std::string& name, double fallback) const {
        for (const auto& kv : init)
            if (kv.first == name) return kv.second;
        return fallback;
    }
};

// Random-walk proposal scale adapted during burn-in toward a 0.30-0.45
// acceptance rate, frozen afterwards.
class AdaptiveScale {
  public:
    explicit AdaptiveScale(double initial = 0.5) : scale_(initial) {}

    double scale() const { return scale_; }

    void observe(bool accepted, bool adapting) {
        if (!adapting) return;
        ++tried_;
        if (accepted) ++accepted_;
        if (tried_ == window_) {
            const double rate = double(accepted_) / double(window_);
            if (rate < 0.30) scale_ *= 0.8;
            if (rate > 0.45) scale_ *= 1.25;
            scale_ = std::min(std::max(scale_, 1e-8), 1e8);
            tried_ = accepted_ = 0;
        }
    }

  private:
    double scale_;
    Index tried_ = 0, accepted_ = 0;
    static constexpr Index window_ = 50;
};

// Retained draws with one named column per scalar parameter. Deviance draws
// (and the deviance at the posterior mean) ride along so model comparison
// needs no second likelihood pass.
struct PosteriorSamples {
    Matrix draws;  // retained x parameters
    std::vector<std::string> names;
    Index iterations = 0;
    Index burn_in = 0;
    std::uint64_t seed = 0;
    Vector deviance_draws;
    double deviance_at_mean = std::numeric_limits<double>::quiet_NaN();

    Index column(const std::string& name) const;
    Vector column_draws(const std::string& name) const;
    Index retained() const { return draws.rows(); }
};

struct ParameterSummary {
    std::string name;
    double mean, sd, lo95, hi95;
};

enum class SummaryTransform { identity, exponential };

// quantile of a draw vector (linear interpolation between order statistics)
double draw_quantile(Vector draws, double p);

ParameterSummary summarize_draws(const std::string& name, const Vector& draws,
                                 SummaryTransform t = SummaryTransform::identity);

std::vector<ParameterSummary> posterior_summary(const PosteriorSamples& samples,
                                                SummaryTransform t = SummaryTransform::identity);

// deviance information criterion: mean deviance plus effective parameter count
// p_D = mean deviance - deviance at the posterior mean
double effective_parameters(const PosteriorSamples& samples);
double dic(const PosteriorSamples& samples);

struct DicTableRow {
    Index L;
    double dic;
};
struct LSelection {
    Index chosen_L = 0;
    std::vector<DicTableRow> table;
};

// fit each candidate basis size and keep the DIC minimizer
LSelection select_L(const std::vector<Index>& candidates,
                    const std::function<PosteriorSamples(Index)>& fit_at_L);

// default candidate menu for the basis-size search
std::vector<Index> default_spline_sizes();

}  // namespace ecar
