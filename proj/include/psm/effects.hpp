#ifndef PSM_EFFECTS_HPP
#define PSM_EFFECTS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cohort.hpp"
#include "error.hpp"
#include "logit.hpp"
#include "matcher.hpp"
#include "random.hpp"
#include "stats.hpp"

/**
 * @file effects.hpp
 * @brief Odds ratio and ATE/ATT/ATC estimates on matched samples.
 */

namespace psm {

enum class Estimand { OR, ATE, ATT, ATC };

inline std::string_view to_string(Estimand e) {
    switch (e) {
        case Estimand::OR: return "OR";
        case Estimand::ATE: return "ATE";
        case Estimand::ATT: return "ATT";
        case Estimand::ATC: return "ATC";
    }
    return "?";
}

struct EffectEstimate {
    Estimand estimand = Estimand::ATT;
    double point = 0;
    double standard_error = 0;  // log scale for the odds ratio
    double ci_low = 0;
    double ci_high = 0;
    double p_value = 1;
    std::size_t replicates = 0;  // 0 for analytic intervals
    std::string method;

    /// Bootstrap draws behind the interval; empty for analytic estimates.
    std::vector<double> draws;
};

enum class BootstrapUnit { pair, record };

inline std::string_view to_string(BootstrapUnit u) { return u == BootstrapUnit::pair ? "pair" : "record"; }

struct BootstrapConfig {
    std::size_t replicates = 2000;
    std::uint64_t seed = 0;
    BootstrapUnit unit = BootstrapUnit::pair;
    unsigned threads = 0;  // 0: hardware concurrency

    void validate() const {
        if (replicates < 100) {
            throw Error(ErrorCode::InvalidConfig, "at least 100 bootstrap replicates required");
        }
    }
};

/// Treated/control by outcome counts: a treated with outcome, b treated without, c control with, d control without.
struct TwoByTwo {
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t c = 0;
    std::size_t d = 0;

    double cross_product_ratio() const {
        return (static_cast<double>(a) * static_cast<double>(d)) / (static_cast<double>(b) * static_cast<double>(c));
    }

    std::string str() const {
        return "[a=" + std::to_string(a) + ", b=" + std::to_string(b) + ", c=" + std::to_string(c) + ", d=" + std::to_string(d) + "]";
    }
};

inline TwoByTwo two_by_two(const Cohort& cohort) {
    const auto t = cohort.schema().treatment_index();
    const auto y = cohort.schema().outcome_index();
    TwoByTwo table;
    for (const auto& rec : cohort.records()) {
        const bool treated = rec.values[t] == 1.0;
        const bool event = rec.values[y] == 1.0;
        if (treated) {
            (event ? table.a : table.b) += 1;
        } else {
            (event ? table.c : table.d) += 1;
        }
    }
    return table;
}

/**
 * Odds ratio of the outcome between arms from an intercept + treatment
 * logistic model, with a Wald interval on the log scale.
 */
inline EffectEstimate odds_ratio(const Cohort& matched, const FitOptions& options = {}) {
    const auto table = two_by_two(matched);
    if (table.a == 0 || table.b == 0 || table.c == 0 || table.d == 0) {
        throw Error(ErrorCode::DegenerateTable, "zero cell in 2x2 table " + table.str());
    }
    const std::size_t predictors[] = {matched.schema().treatment_index()};
    const auto design = DesignMatrix::from_cohort(matched, predictors, matched.schema().outcome_index());
    const auto model = fit(design, options);
    const auto w = wald_test(model, 1);

    EffectEstimate out;
    out.estimand = Estimand::OR;
    out.point = std::exp(model.coefficients[1]);
    out.standard_error = model.standard_errors[1];
    out.ci_low = std::exp(w.ci_low);
    out.ci_high = std::exp(w.ci_high);
    out.p_value = w.p_value;
    out.method = "logistic-wald";
    return out;
}

/// Outcome difference (treated minus control) for every pair.
inline std::vector<double> pair_differences(const MatchedSample& sample, std::span<const double> outcomes) {
    std::vector<double> diffs;
    diffs.reserve(sample.pairs.size());
    for (const auto& p : sample.pairs) {
        if (p.treated >= outcomes.size() || p.control >= outcomes.size()) {
            throw Error(ErrorCode::IndexOutOfRange, "pair refers to a missing outcome");
        }
        diffs.push_back(outcomes[p.treated] - outcomes[p.control]);
    }
    return diffs;
}

/// Means of pair differences over pairs resampled with replacement.
inline std::vector<double> pair_bootstrap(std::span<const double> diffs, std::size_t replicates, std::uint64_t seed) {
    std::vector<double> draws(replicates);
    const auto n = static_cast<std::uint64_t>(diffs.size());
    for (std::size_t r = 0; r < replicates; ++r) {
        auto rng = RandomStream::substream(seed, r);
        double total = 0;
        for (std::uint64_t i = 0; i < n; ++i) {
            total += diffs[static_cast<std::size_t>(rng.below(n))];
        }
        draws[r] = total / static_cast<double>(n);
    }
    return draws;
}

/**
 * Percentile-bootstrap summary: SE is the SD of the draws, the interval is
 * their 2.5% and 97.5% quantiles, and the p-value is the two-sided tail
 * share at zero, 2 (min(#draws <= 0, #draws >= 0) + 1) / (B + 1), capped at 1.
 */
inline EffectEstimate bootstrap_summary(Estimand estimand, double point, std::vector<double> draws, std::string method) {
    EffectEstimate out;
    out.estimand = estimand;
    out.point = point;
    out.method = std::move(method);
    out.replicates = draws.size();
    if (draws.empty()) {
        throw Error(ErrorCode::EmptySample, "no bootstrap draws");
    }
    out.standard_error = stats::sd(draws);
    std::vector<double> sorted = draws;
    std::sort(sorted.begin(), sorted.end());
    out.ci_low = stats::sorted_quantile(sorted, 0.025);
    out.ci_high = stats::sorted_quantile(sorted, 0.975);
    const auto le = static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), 0.0) - sorted.begin());
    const auto ge = static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), 0.0));
    const auto b = static_cast<double>(sorted.size());
    out.p_value = std::min(1.0, 2.0 * (std::min(le, ge) + 1.0) / (b + 1.0));
    out.draws = std::move(draws);
    return out;
}

namespace detail {

inline EffectEstimate paired_effect(Estimand estimand, const MatchedSample& sample, std::span<const double> outcomes, const BootstrapConfig& config) {
    config.validate();
    if (sample.pairs.empty()) {
        throw Error(ErrorCode::EmptySample, "matched sample has no pairs");
    }
    const auto diffs = pair_differences(sample, outcomes);
    const double point = stats::mean(diffs);
    auto draws = pair_bootstrap(diffs, config.replicates, config.seed);
    return bootstrap_summary(estimand, point, std::move(draws), "pair-bootstrap-percentile");
}

}

/// Effect on the treated from a treated-to-control matching pass.
inline EffectEstimate att(const MatchedSample& sample, std::span<const double> outcomes, const BootstrapConfig& config = {}) {
    if (sample.options.direction != MatchDirection::treated_to_control) {
        throw Error(ErrorCode::MismatchedInputs, "ATT needs a treated-to-control matching pass");
    }
    return detail::paired_effect(Estimand::ATT, sample, outcomes, config);
}

/// Effect on the controls from a control-to-treated matching pass.
inline EffectEstimate atc(const MatchedSample& sample, std::span<const double> outcomes, const BootstrapConfig& config = {}) {
    if (sample.options.direction != MatchDirection::control_to_treated) {
        throw Error(ErrorCode::MismatchedInputs, "ATC needs a control-to-treated matching pass");
    }
    BootstrapConfig shifted = config;
    shifted.seed = mix_seed(config.seed ^ 0xA7C0A7C0ULL);
    return detail::paired_effect(Estimand::ATC, sample, outcomes, shifted);
}

/**
 * ATE as the weighted average (w_t ATT + w_c ATC) / (w_t + w_c).
 * Bootstrap draws are combined the same way, replicate by replicate,
 * unless `ate_draws` supplies them directly (full-pipeline bootstrap).
 */
inline EffectEstimate ate(const EffectEstimate& att_est, const EffectEstimate& atc_est, double weight_treated, double weight_control,
                          std::vector<double> ate_draws = {}) {
    if (att_est.estimand != Estimand::ATT || atc_est.estimand != Estimand::ATC) {
        throw Error(ErrorCode::MismatchedInputs, "ate() takes an ATT and an ATC estimate");
    }
    if (!(weight_treated >= 0 && weight_control >= 0 && weight_treated + weight_control > 0)) {
        throw Error(ErrorCode::MismatchedInputs, "weights must be non-negative with a positive sum");
    }
    const double wt = weight_treated / (weight_treated + weight_control);
    const double wc = 1.0 - wt;
    const double point = wt * att_est.point + wc * atc_est.point;
    if (ate_draws.empty()) {
        if (att_est.draws.size() != atc_est.draws.size() || att_est.draws.empty()) {
            throw Error(ErrorCode::MismatchedInputs, "ATT and ATC need bootstrap draws of equal length");
        }
        ate_draws.resize(att_est.draws.size());
        for (std::size_t r = 0; r < ate_draws.size(); ++r) {
            ate_draws[r] = wt * att_est.draws[r] + wc * atc_est.draws[r];
        }
    }
    auto method = att_est.method;
    return bootstrap_summary(Estimand::ATE, point, std::move(ate_draws), std::move(method));
}

}

#endif
