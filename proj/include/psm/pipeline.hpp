#ifndef PSM_PIPELINE_HPP
#define PSM_PIPELINE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cohort.hpp"
#include "effects.hpp"
#include "logit.hpp"
#include "matcher.hpp"
#include "random.hpp"

/**
 * @file pipeline.hpp
 * @brief Fit, score, match in both directions and estimate effects.
 */

namespace psm {

enum class AteMode {
    weighted,     // (n_treated ATT + n_control ATC) / n
    pooled_pairs  // mean pair difference over both matching passes
};

inline std::string_view to_string(AteMode m) { return m == AteMode::weighted ? "weighted" : "pooled_pairs"; }

struct PipelineSettings {
    double caliper_multiplier = 0.25;
    CaliperScale caliper_scale = CaliperScale::probability;
    MatchOrder order = MatchOrder::random;
    std::uint64_t seed = 0;
    AteMode ate_mode = AteMode::weighted;
    FitOptions fit_options;
};

inline MatchOptions forward_options(const PipelineSettings& s) {
    return {s.order, MatchDirection::treated_to_control, s.seed};
}

inline MatchOptions reverse_options(const PipelineSettings& s) {
    return {s.order, MatchDirection::control_to_treated, mix_seed(s.seed ^ 0x5EEDULL)};
}

inline LogisticFit fit_propensity(const Cohort& cohort, const FitOptions& options = {}) {
    const auto predictors = cohort.schema().covariate_indices();
    const auto design = DesignMatrix::from_cohort(cohort, predictors, cohort.schema().treatment_index());
    return fit(design, options);
}

inline std::pair<double, double> ate_weights(AteMode mode, const PropensityScores& ps, const MatchedSample& forward, const MatchedSample& reverse) {
    if (mode == AteMode::weighted) {
        return {static_cast<double>(ps.treated.size()), static_cast<double>(ps.control.size())};
    }
    return {static_cast<double>(forward.pairs.size()), static_cast<double>(reverse.pairs.size())};
}

/// Point estimates only; `valid` is false when a matching pass produced no pairs.
struct PointEstimates {
    bool valid = false;
    double att = 0;
    double atc = 0;
    double ate = 0;
    std::size_t forward_pairs = 0;
    std::size_t reverse_pairs = 0;
};

inline PointEstimates estimate_points(const Cohort& cohort, const PipelineSettings& settings) {
    const auto model = fit_propensity(cohort, settings.fit_options);
    const auto ps = score(cohort, model);
    const auto caliper = Caliper::from_scores(ps, settings.caliper_multiplier, settings.caliper_scale);
    const auto forward = match(ps, caliper, forward_options(settings));
    const auto reverse = match(ps, caliper, reverse_options(settings));
    PointEstimates out;
    out.forward_pairs = forward.pairs.size();
    out.reverse_pairs = reverse.pairs.size();
    if (forward.pairs.empty() || reverse.pairs.empty()) {
        return out;
    }
    const auto y = cohort.outcomes();
    out.att = stats::mean(pair_differences(forward, y));
    out.atc = stats::mean(pair_differences(reverse, y));
    const auto [wt, wc] = ate_weights(settings.ate_mode, ps, forward, reverse);
    out.ate = (wt * out.att + wc * out.atc) / (wt + wc);
    out.valid = true;
    return out;
}

/// Resample within each arm, keeping the arm sizes fixed.
inline Cohort stratified_resample(const Cohort& cohort, RandomStream& rng) {
    const auto t = cohort.schema().treatment_index();
    std::vector<std::size_t> treated;
    std::vector<std::size_t> control;
    for (std::size_t r = 0; r < cohort.size(); ++r) {
        (cohort.value(r, t) == 1.0 ? treated : control).push_back(r);
    }
    std::vector<PatientRecord> records;
    records.reserve(cohort.size());
    for (const auto* arm : {&treated, &control}) {
        for (std::size_t i = 0; i < arm->size(); ++i) {
            records.push_back(cohort.records()[(*arm)[static_cast<std::size_t>(rng.below(arm->size()))]]);
        }
    }
    return Cohort(cohort.schema(), std::move(records));
}

struct PipelineDraws {
    std::vector<double> att;
    std::vector<double> atc;
    std::vector<double> ate;
    std::size_t failed = 0;  // replicates with a failed fit or an empty matching pass
};

inline unsigned worker_count(unsigned requested, std::size_t jobs) {
    unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

/// Runs body(i) for i in [0, jobs) on a small thread pool; bodies must only write their own slot.
template<typename Body>
void parallel_for(std::size_t jobs, unsigned threads, Body&& body) {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < jobs; i = next++) {
            body(i);
        }
    };
    const auto workers = worker_count(threads, jobs);
    if (workers <= 1) {
        worker();
        return;
    }
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back(worker);
    }
}

/**
 * Record-level bootstrap of the whole pipeline: every replicate resamples
 * records within arms, refits the propensity model and reruns both
 * matching passes. Replicate r draws from its own substream, so results do
 * not depend on the number of threads.
 */
inline PipelineDraws pipeline_bootstrap(const Cohort& cohort, const PipelineSettings& settings, const BootstrapConfig& config) {
    config.validate();
    std::vector<PointEstimates> results(config.replicates);
    parallel_for(config.replicates, config.threads, [&](std::size_t r) {
        auto rng = RandomStream::substream(config.seed, r);
        PipelineSettings local = settings;
        local.seed = rng.next();
        try {
            results[r] = estimate_points(stratified_resample(cohort, rng), local);
        } catch (const Error&) {
            results[r] = PointEstimates{};
        }
    });

    PipelineDraws out;
    for (const auto& r : results) {
        if (!r.valid) {
            ++out.failed;
            continue;
        }
        out.att.push_back(r.att);
        out.atc.push_back(r.atc);
        out.ate.push_back(r.ate);
    }
    return out;
}

struct PipelineResult {
    LogisticFit propensity;
    PropensityScores scores;
    Caliper caliper;
    MatchedSample forward;
    MatchedSample reverse;
    std::optional<Cohort> matched;  // records of the treated-to-control pairs
    std::optional<EffectEstimate> odds_ratio;
    std::optional<EffectEstimate> att;
    std::optional<EffectEstimate> atc;
    std::optional<EffectEstimate> ate;
    std::size_t failed_replicates = 0;
    std::string effects_status = "computed";
};

/**
 * Full estimation on one cohort. Effects are left empty, with the reason
 * in `effects_status`, when a matching pass yields no pairs. Estimation
 * errors such as a degenerate 2x2 table propagate to the caller.
 */
inline PipelineResult run_pipeline(const Cohort& cohort, const PipelineSettings& settings, const BootstrapConfig& config) {
    config.validate();
    PipelineResult out;
    out.propensity = fit_propensity(cohort, settings.fit_options);
    out.scores = score(cohort, out.propensity);
    out.caliper = Caliper::from_scores(out.scores, settings.caliper_multiplier, settings.caliper_scale);
    out.forward = match(out.scores, out.caliper, forward_options(settings));
    out.reverse = match(out.scores, out.caliper, reverse_options(settings));

    if (out.forward.pairs.empty() || out.reverse.pairs.empty()) {
        out.effects_status = "not-computed: no pairs within the caliper";
        return out;
    }
    out.matched = matched_cohort(cohort, out.forward);
    out.odds_ratio = odds_ratio(*out.matched, settings.fit_options);

    const auto y = cohort.outcomes();
    const auto [wt, wc] = ate_weights(settings.ate_mode, out.scores, out.forward, out.reverse);
    if (config.unit == BootstrapUnit::pair) {
        out.att = att(out.forward, y, config);
        out.atc = atc(out.reverse, y, config);
        out.ate = ate(*out.att, *out.atc, wt, wc);
    } else {
        auto draws = pipeline_bootstrap(cohort, settings, config);
        out.failed_replicates = draws.failed;
        if (draws.att.size() < 2) {
            throw Error(ErrorCode::EmptySample, "record bootstrap produced no usable replicates");
        }
        const auto att_point = stats::mean(pair_differences(out.forward, y));
        const auto atc_point = stats::mean(pair_differences(out.reverse, y));
        out.att = bootstrap_summary(Estimand::ATT, att_point, std::move(draws.att), "record-bootstrap-percentile");
        out.atc = bootstrap_summary(Estimand::ATC, atc_point, std::move(draws.atc), "record-bootstrap-percentile");
        out.ate = ate(*out.att, *out.atc, wt, wc, std::move(draws.ate));
    }
    return out;
}

}

#endif
