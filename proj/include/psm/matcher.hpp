#ifndef PSM_MATCHER_HPP
#define PSM_MATCHER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cohort.hpp"
#include "error.hpp"
#include "logit.hpp"
#include "random.hpp"
#include "stats.hpp"

/**
 * @file matcher.hpp
 * @brief Propensity scoring and greedy 1:1 caliper matching without replacement.
 */

namespace psm {

struct PropensityScores {
    std::vector<double> scores;
    double sd = 0;  // n-1 denominator
    std::vector<std::size_t> treated;
    std::vector<std::size_t> control;

    /// Builds the structure from raw scores and a 0/1 treatment vector.
    static PropensityScores from_values(std::vector<double> scores, std::span<const double> treatment) {
        if (scores.size() != treatment.size()) {
            throw Error(ErrorCode::DimensionMismatch, "scores and treatment differ in length");
        }
        PropensityScores ps;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (!(scores[i] > 0.0 && scores[i] < 1.0)) {
                throw Error(ErrorCode::BadValue, "score " + std::to_string(i) + " outside (0, 1)");
            }
            (treatment[i] == 1.0 ? ps.treated : ps.control).push_back(i);
        }
        ps.sd = stats::sd(scores);
        ps.scores = std::move(scores);
        return ps;
    }
};

/// Propensity score per record from a fit over the cohort's covariate columns.
inline PropensityScores score(const Cohort& cohort, const LogisticFit& fit) {
    const auto predictors = cohort.schema().covariate_indices();
    if (predictors.size() != fit.predictors()) {
        throw Error(ErrorCode::DimensionMismatch, "fit has " + std::to_string(fit.predictors()) + " predictors, cohort has " + std::to_string(predictors.size()) + " covariates");
    }
    std::vector<double> scores;
    scores.reserve(cohort.size());
    std::vector<double> row(predictors.size());
    for (const auto& rec : cohort.records()) {
        for (std::size_t j = 0; j < predictors.size(); ++j) {
            row[j] = rec.values[predictors[j]];
        }
        scores.push_back(predict(fit, row));
    }
    const auto treatment = cohort.treatment();
    return PropensityScores::from_values(std::move(scores), treatment);
}

enum class CaliperScale { probability, logit };

struct Caliper {
    double multiplier = 0.25;
    CaliperScale scale = CaliperScale::probability;
    double width = 0;  // multiplier x SD of the scores on `scale`

    /// Width as a multiple of the score SD on the chosen scale.
    static Caliper from_scores(const PropensityScores& ps, double multiplier, CaliperScale scale = CaliperScale::probability) {
        if (!(multiplier >= 0)) {
            throw Error(ErrorCode::InvalidConfig, "caliper multiplier must be non-negative");
        }
        Caliper c;
        c.multiplier = multiplier;
        c.scale = scale;
        if (scale == CaliperScale::probability) {
            c.width = multiplier * ps.sd;
        } else {
            std::vector<double> logits;
            logits.reserve(ps.scores.size());
            for (double s : ps.scores) {
                logits.push_back(stats::logit(s));
            }
            c.width = multiplier * stats::sd(logits);
        }
        return c;
    }

    /// Fixed width, bypassing the SD rule.
    static Caliper absolute(double width, CaliperScale scale = CaliperScale::probability) {
        if (!(width >= 0)) {
            throw Error(ErrorCode::InvalidConfig, "caliper width must be non-negative");
        }
        Caliper c;
        c.multiplier = 0;
        c.scale = scale;
        c.width = width;
        return c;
    }

    double transform(double score) const {
        return scale == CaliperScale::probability ? score : stats::logit(score);
    }
};

enum class MatchOrder { random, descending_ps };
enum class MatchDirection { treated_to_control, control_to_treated };

inline std::string_view to_string(MatchOrder o) { return o == MatchOrder::random ? "random" : "descending"; }
inline std::string_view to_string(MatchDirection d) {
    return d == MatchDirection::treated_to_control ? "treated_to_control" : "control_to_treated";
}
inline std::string_view to_string(CaliperScale s) { return s == CaliperScale::probability ? "probability" : "logit"; }

struct MatchOptions {
    MatchOrder order = MatchOrder::random;
    MatchDirection direction = MatchDirection::treated_to_control;
    std::uint64_t seed = 0;
};

struct MatchedPair {
    std::size_t treated = 0;
    std::size_t control = 0;
    double distance = 0;  // on the caliper scale
    bool operator==(const MatchedPair&) const = default;
};

struct MatchedSample {
    std::vector<MatchedPair> pairs;  // in formation order
    std::size_t unmatched_treated = 0;
    std::size_t unmatched_control = 0;
    Caliper caliper;
    MatchOptions options;
};

/// Order in which source units pick their partners.
inline std::vector<std::size_t> processing_order(const PropensityScores& ps, const std::vector<std::size_t>& source, const MatchOptions& options) {
    std::vector<std::size_t> order = source;
    if (options.order == MatchOrder::descending_ps) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return ps.scores[a] > ps.scores[b];
        });
    } else {
        RandomStream rng(options.seed);
        rng.shuffle(order);
    }
    return order;
}

/**
 * Greedy nearest-neighbour matching without replacement. Each source unit,
 * visited in processing order, takes the closest unused candidate if that
 * distance is within the caliper and otherwise stays unmatched. Equal
 * distances go to the lowest candidate index.
 */
inline MatchedSample match(const PropensityScores& ps, const Caliper& caliper, const MatchOptions& options = {}) {
    if (ps.treated.empty() || ps.control.empty()) {
        throw Error(ErrorCode::EmptyGroup, "both treatment groups need at least one unit");
    }
    const bool forward = options.direction == MatchDirection::treated_to_control;
    const auto& source = forward ? ps.treated : ps.control;
    const auto& target = forward ? ps.control : ps.treated;

    std::vector<double> position(ps.scores.size());
    for (std::size_t i = 0; i < ps.scores.size(); ++i) {
        position[i] = caliper.transform(ps.scores[i]);
    }

    using Key = std::pair<double, std::size_t>;
    std::set<Key> available;
    for (auto t : target) {
        available.emplace(position[t], t);
    }

    MatchedSample out;
    out.caliper = caliper;
    out.options = options;

    for (auto s : processing_order(ps, source, options)) {
        if (available.empty()) {
            break;
        }
        const double x = position[s];
        auto right = available.lower_bound(Key{x, 0});
        std::set<Key>::iterator best = available.end();
        double best_distance = 0;

        if (right != available.end()) {
            best = right;  // lowest index among equal positions
            best_distance = std::abs(right->first - x);
        }
        if (right != available.begin()) {
            const double left_pos = std::prev(right)->first;
            auto left = available.lower_bound(Key{left_pos, 0});
            const double d = std::abs(left_pos - x);
            if (best == available.end() || d < best_distance || (d == best_distance && left->second < best->second)) {
                best = left;
                best_distance = d;
            }
        }
        if (best != available.end() && best_distance <= caliper.width) {
            const auto partner = best->second;
            available.erase(best);
            if (forward) {
                out.pairs.push_back({s, partner, best_distance});
            } else {
                out.pairs.push_back({partner, s, best_distance});
            }
        }
    }
    out.unmatched_treated = ps.treated.size() - out.pairs.size();
    out.unmatched_control = ps.control.size() - out.pairs.size();
    return out;
}

/**
 * Cohort of the paired records, laid out treated, control, treated, ...
 * with the pair structure kept in `Cohort::pairs()`.
 */
inline Cohort matched_cohort(const Cohort& cohort, const MatchedSample& sample) {
    if (sample.pairs.empty()) {
        throw Error(ErrorCode::EmptyCohort, "matched sample has no pairs");
    }
    std::vector<PatientRecord> records;
    std::vector<Cohort::Pair> pairs;
    records.reserve(sample.pairs.size() * 2);
    for (const auto& p : sample.pairs) {
        if (p.treated >= cohort.size() || p.control >= cohort.size()) {
            throw Error(ErrorCode::IndexOutOfRange, "pair (" + std::to_string(p.treated) + ", " + std::to_string(p.control) + ")");
        }
        pairs.emplace_back(records.size(), records.size() + 1);
        records.push_back(cohort.records()[p.treated]);
        records.push_back(cohort.records()[p.control]);
    }
    return Cohort(cohort.schema(), std::move(records), std::move(pairs));
}

/// Audit table: pair_id, treated_row, control_row, ps_treated, ps_control, distance.
inline void write_pairs_csv(std::ostream& out, const MatchedSample& sample, const PropensityScores& ps) {
    out << "pair_id,treated_row,control_row,ps_treated,ps_control,distance\n";
    for (std::size_t i = 0; i < sample.pairs.size(); ++i) {
        const auto& p = sample.pairs[i];
        out << i << ',' << p.treated << ',' << p.control << ','
            << detail::format_number(ps.scores[p.treated]) << ','
            << detail::format_number(ps.scores[p.control]) << ','
            << detail::format_number(p.distance) << '\n';
    }
}

}

#endif
