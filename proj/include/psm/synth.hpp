#ifndef PSM_SYNTH_HPP
#define PSM_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cohort.hpp"
#include "effects.hpp"
#include "error.hpp"
#include "pipeline.hpp"
#include "random.hpp"
#include "stats.hpp"

/**
 * @file synth.hpp
 * @brief Synthetic cohorts with known effects, and the glioma marginals fixture.
 */

namespace psm {

struct CovariateGenerator {
    std::string name;
    Kind kind = Kind::binary;
    double prevalence = 0.5;  // binary
    double mean = 0;          // continuous
    double sd = 1;            // continuous
};

enum class EffectScale {
    log_odds,  // outcome logit shifts by true_effect under treatment
    risk       // outcome probability shifts by exactly true_effect
};

/**
 * Continuous covariates enter both linear predictors standardized, as
 * (x - mean) / sd, so coefficients are per-SD effects.
 *
 * On the risk scale the untreated probability is squeezed into
 * [0, 1 - |effect|] (shifted up by |effect| when the effect is negative) so
 * the additive effect never needs clipping.
 */
struct GeneratorConfig {
    std::size_t n = 1000;
    std::vector<CovariateGenerator> covariates;
    double treatment_intercept = 0;
    std::vector<double> confounding_coefficients;
    double outcome_intercept = 0;
    std::vector<double> outcome_coefficients;
    double true_effect = 0;
    EffectScale scale = EffectScale::log_odds;
    std::string treatment_name = "T";
    std::string outcome_name = "Y";
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 20) {
            throw Error(ErrorCode::InvalidConfig, "n must be at least 20");
        }
        if (confounding_coefficients.size() != covariates.size() || outcome_coefficients.size() != covariates.size()) {
            throw Error(ErrorCode::InvalidConfig, "one confounding and one outcome coefficient per covariate");
        }
        for (const auto& c : covariates) {
            if (c.kind == Kind::binary && !(c.prevalence > 0 && c.prevalence < 1)) {
                throw Error(ErrorCode::InvalidConfig, c.name + ": prevalence must lie in (0, 1)");
            }
            if (c.kind == Kind::continuous && !(c.sd > 0)) {
                throw Error(ErrorCode::InvalidConfig, c.name + ": sd must be positive");
            }
        }
        if (scale == EffectScale::risk && !(std::abs(true_effect) < 1)) {
            throw Error(ErrorCode::InvalidConfig, "risk-scale effect must lie in (-1, 1)");
        }
    }

    Schema schema() const {
        std::vector<CovariateSpec> cols;
        for (const auto& c : covariates) {
            cols.push_back({c.name, c.kind, Role::covariate, std::nullopt, "", false});
        }
        cols.push_back({treatment_name, Kind::binary, Role::treatment, std::nullopt, "", false});
        cols.push_back({outcome_name, Kind::binary, Role::outcome, std::nullopt, "", false});
        return Schema(std::move(cols));
    }
};

struct GeneratedCohort {
    Cohort cohort;
    double truth = 0;      // sample-average risk difference over everyone
    double truth_att = 0;  // ... over the treated
    double truth_atc = 0;  // ... over the controls
};

inline std::pair<double, double> potential_outcome_probabilities(const GeneratorConfig& config, double linear) {
    const double base = stats::sigmoid(linear);
    if (config.scale == EffectScale::log_odds) {
        return {base, stats::sigmoid(linear + config.true_effect)};
    }
    const double tau = config.true_effect;
    const double p0 = (1.0 - std::abs(tau)) * base + (tau < 0 ? -tau : 0.0);
    return {p0, p0 + tau};
}

/**
 * Draws covariates, then treatment from the confounding model, then the
 * outcome from the outcome model. Truth values average the two potential
 * outcome probabilities over the drawn covariates.
 */
inline GeneratedCohort generate(const GeneratorConfig& config) {
    config.validate();
    RandomStream rng(config.seed);
    const auto k = config.covariates.size();
    std::vector<PatientRecord> records;
    records.reserve(config.n);
    double sum_all = 0;
    double sum_t = 0;
    double sum_c = 0;
    std::size_t n_t = 0;
    for (std::size_t i = 0; i < config.n; ++i) {
        PatientRecord rec;
        rec.values.resize(k + 2);
        double lin_t = config.treatment_intercept;
        double lin_y = config.outcome_intercept;
        for (std::size_t j = 0; j < k; ++j) {
            const auto& c = config.covariates[j];
            double standardized = 0;
            if (c.kind == Kind::binary) {
                rec.values[j] = rng.bernoulli(c.prevalence) ? 1.0 : 0.0;
                standardized = rec.values[j];
            } else {
                standardized = rng.normal();
                rec.values[j] = c.mean + c.sd * standardized;
            }
            lin_t += config.confounding_coefficients[j] * standardized;
            lin_y += config.outcome_coefficients[j] * standardized;
        }
        const bool treated = rng.bernoulli(stats::sigmoid(lin_t));
        const auto [p0, p1] = potential_outcome_probabilities(config, lin_y);
        const bool event = rng.bernoulli(treated ? p1 : p0);
        rec.values[k] = treated ? 1.0 : 0.0;
        rec.values[k + 1] = event ? 1.0 : 0.0;
        sum_all += p1 - p0;
        if (treated) {
            sum_t += p1 - p0;
            ++n_t;
        } else {
            sum_c += p1 - p0;
        }
        records.push_back(std::move(rec));
    }
    const auto n_c = config.n - n_t;
    if (n_t == 0 || n_c == 0) {
        throw Error(ErrorCode::InvalidConfig, "generated cohort has a single treatment arm");
    }
    GeneratedCohort out{Cohort(config.schema(), std::move(records)), 0, 0, 0};
    out.truth = sum_all / static_cast<double>(config.n);
    out.truth_att = sum_t / static_cast<double>(n_t);
    out.truth_atc = sum_c / static_cast<double>(n_c);
    return out;
}

/// Difference in outcome means between arms, ignoring covariates.
inline double naive_difference(const Cohort& cohort) {
    const auto t = cohort.treatment();
    const auto y = cohort.outcomes();
    double st = 0;
    double sc = 0;
    double nt = 0;
    double nc = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] == 1.0) {
            st += y[i];
            ++nt;
        } else {
            sc += y[i];
            ++nc;
        }
    }
    return st / nt - sc / nc;
}

struct BiasRow {
    std::uint64_t seed = 0;
    double truth = 0;
    double truth_att = 0;
    double naive = 0;
    double psm = 0;  // ATT on the treated-to-control matched sample
    double psm_se = 0;
    double ci_low = 0;
    double ci_high = 0;
    std::size_t pairs = 0;
    bool ok = false;
};

struct BiasSummary {
    std::vector<BiasRow> rows;
    double naive_mean_abs_bias = 0;  // against the overall truth
    double psm_mean_abs_bias = 0;    // against the truth on the treated
    double reduction = 0;            // 1 - psm / naive
    double coverage = 0;             // share of PSM intervals covering the treated truth
    double within_three_se = 0;      // share with |psm - truth_att| <= 3 SE
    std::size_t failed = 0;
};

struct BiasStudyOptions {
    PipelineSettings pipeline;
    std::size_t replicates = 500;
    unsigned threads = 0;
};

/**
 * Repeats generation and PSM over `seeds` derived seeds and compares naive
 * and matched estimates with the generator's truth. Seed s uses
 * substream(config.seed, s) for the cohort and for matching.
 */
inline BiasSummary bias_study(const GeneratorConfig& config, std::size_t seeds, const BiasStudyOptions& options = {}) {
    if (seeds < 10) {
        throw Error(ErrorCode::InvalidConfig, "bias study needs at least 10 seeds");
    }
    config.validate();
    BiasSummary out;
    out.rows.resize(seeds);
    parallel_for(seeds, options.threads, [&](std::size_t s) {
        auto rng = RandomStream::substream(config.seed, s);
        GeneratorConfig local = config;
        local.seed = rng.next();
        BiasRow& row = out.rows[s];
        row.seed = local.seed;
        try {
            const auto gen = generate(local);
            row.truth = gen.truth;
            row.truth_att = gen.truth_att;
            row.naive = naive_difference(gen.cohort);

            PipelineSettings settings = options.pipeline;
            settings.seed = rng.next();
            const auto model = fit_propensity(gen.cohort, settings.fit_options);
            const auto ps = score(gen.cohort, model);
            const auto caliper = Caliper::from_scores(ps, settings.caliper_multiplier, settings.caliper_scale);
            const auto sample = match(ps, caliper, forward_options(settings));
            row.pairs = sample.pairs.size();
            if (sample.pairs.empty()) {
                return;
            }
            BootstrapConfig boot;
            boot.replicates = options.replicates;
            boot.seed = rng.next();
            const auto est = att(sample, gen.cohort.outcomes(), boot);
            row.psm = est.point;
            row.psm_se = est.standard_error;
            row.ci_low = est.ci_low;
            row.ci_high = est.ci_high;
            row.ok = true;
        } catch (const Error&) {
            row.ok = false;
        }
    });

    double naive_total = 0;
    double psm_total = 0;
    std::size_t covered = 0;
    std::size_t close = 0;
    std::size_t used = 0;
    for (const auto& row : out.rows) {
        if (!row.ok) {
            ++out.failed;
            continue;
        }
        ++used;
        naive_total += std::abs(row.naive - row.truth);
        psm_total += std::abs(row.psm - row.truth_att);
        covered += row.ci_low <= row.truth_att && row.truth_att <= row.ci_high;
        close += std::abs(row.psm - row.truth_att) <= 3.0 * row.psm_se;
    }
    if (used == 0) {
        throw Error(ErrorCode::EmptySample, "every seed of the bias study failed");
    }
    const auto u = static_cast<double>(used);
    out.naive_mean_abs_bias = naive_total / u;
    out.psm_mean_abs_bias = psm_total / u;
    out.reduction = out.naive_mean_abs_bias > 0 ? 1.0 - out.psm_mean_abs_bias / out.naive_mean_abs_bias : 0.0;
    out.coverage = static_cast<double>(covered) / u;
    out.within_three_se = static_cast<double>(close) / u;
    return out;
}

/// Marker counts: overall, LGG, GBM, male.
struct MarkerMargins {
    const char* name;
    int total;
    int lgg;
    int gbm;
    int male;
};

/// Glioma cohort margins by grade and by gender, in schema order.
inline constexpr std::array<MarkerMargins, 12> glioma_marker_margins{{
    {"IDH1", 404, 381, 23, 179},
    {"ATRX", 217, 183, 34, 101},
    {"PTEN", 141, 25, 116, 54},
    {"EGFR", 112, 31, 81, 42},
    {"CIC", 111, 107, 4, 55},
    {"BCOR", 29, 17, 12, 18},
    {"MUC16", 98, 41, 57, 43},
    {"PIK3R1", 54, 21, 33, 17},
    {"PDGFRA", 22, 6, 16, 11},
    {"CSMD3", 27, 12, 15, 14},
    {"IDH2", 23, 21, 2, 11},
    {"FAT4", 23, 11, 12, 14},
}};

/// Canonical glioma schema: Age, Gender (treatment, 1 = male), twelve markers, Grade (outcome, 1 = GBM).
inline Schema glioma_schema() {
    std::vector<CovariateSpec> cols;
    cols.push_back({"Age", Kind::continuous, Role::covariate, 18.0, "", false});
    cols.push_back({"Gender", Kind::binary, Role::treatment, std::nullopt, "", false});
    for (const auto& m : glioma_marker_margins) {
        cols.push_back({m.name, Kind::binary, Role::covariate, std::nullopt, "", false});
    }
    cols.push_back({"Grade", Kind::binary, Role::outcome, std::nullopt, "", false});
    return Schema(std::move(cols));
}

/**
 * Glioma-like generator: the twelve markers at their overall prevalences,
 * an age covariate (mean 50.94, SD 15.70), treatment prevalence near 41.84%
 * and mild confounding. The outcome model leans on IDH1, age, PTEN, EGFR
 * and CIC, which dominate the grade differences.
 */
inline GeneratorConfig glioma_like_config(std::size_t n = 839, std::uint64_t seed = 0) {
    GeneratorConfig c;
    c.n = n;
    c.seed = seed;
    c.treatment_name = "Gender";
    c.outcome_name = "Grade";
    c.covariates.push_back({"Age", Kind::continuous, 0, 50.94, 15.70});
    for (const auto& m : glioma_marker_margins) {
        c.covariates.push_back({m.name, Kind::binary, m.total / 839.0, 0, 1});
    }
    //                      Age   IDH1  ATRX  PTEN   EGFR   CIC  BCOR  MUC16 PIK3R1 PDGFRA CSMD3 IDH2  FAT4
    c.confounding_coefficients = {-0.03, 0.2, 0.25, -0.15, -0.15, 0.3, 0.8, 0.1, -0.5, 0.3, 0.4, 0.25, 0.7};
    c.outcome_coefficients = {1.0, -2.5, -0.5, 1.0, 0.8, -1.5, 0.0, 0.4, 0.5, 0.6, 0.3, -1.0, 0.3};
    c.treatment_intercept = stats::logit(0.4184) - 0.1;
    c.outcome_intercept = 0.2;
    c.true_effect = 0.3;
    c.scale = EffectScale::risk;
    return c;
}

/// Randomized-trial shape: treatment ignores the covariates; constant risk difference `effect`.
inline GeneratorConfig no_confounding_config(std::size_t n = 1000, std::uint64_t seed = 0, double effect = 0.15) {
    GeneratorConfig c;
    c.n = n;
    c.seed = seed;
    c.covariates = {
        {"Z", Kind::continuous, 0, 0.0, 1.0},
        {"B1", Kind::binary, 0.3, 0, 1},
        {"B2", Kind::binary, 0.5, 0, 1},
    };
    c.confounding_coefficients = {0.0, 0.0, 0.0};
    c.outcome_coefficients = {0.8, 0.5, -0.4};
    c.outcome_intercept = -0.3;
    c.true_effect = effect;
    c.scale = EffectScale::risk;
    return c;
}

/**
 * One standard-normal and one binary (p = 0.4) confounder driving both
 * treatment (-0.3 + 1.2 Z + 0.8 B) and outcome (-0.5 + 1.0 Z + 0.7 B) on the
 * log-odds scale, with no treatment effect.
 */
inline GeneratorConfig strong_confounding_config(std::size_t n = 2000, std::uint64_t seed = 0) {
    GeneratorConfig c;
    c.n = n;
    c.seed = seed;
    c.covariates = {
        {"Z", Kind::continuous, 0, 0.0, 1.0},
        {"B", Kind::binary, 0.4, 0, 1},
    };
    c.treatment_intercept = -0.3;
    c.confounding_coefficients = {1.2, 0.8};
    c.outcome_intercept = -0.5;
    c.outcome_coefficients = {1.0, 0.7};
    c.true_effect = 0.0;
    c.scale = EffectScale::log_odds;
    return c;
}

namespace detail {

/// n points spread evenly over [-sqrt(3), sqrt(3)], shuffled, then rescaled to mean 0 and sample SD 1.
inline std::vector<double> standardized_spread(std::size_t n, RandomStream& rng) {
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = std::sqrt(3.0) * (2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n) - 1.0);
    }
    rng.shuffle(z);
    const double m = stats::mean(z);
    const double s = stats::sd(z);
    for (auto& v : z) {
        v = (v - m) / s;
    }
    return z;
}

}

/**
 * Deterministic 839-record cohort whose grade-wise and gender-wise margins
 * equal the published glioma tables at reporting precision. Only margins
 * are reproduced; associations between covariates are arbitrary.
 *
 * Cells are (gender, grade). Marker counts are split across cells
 * proportionally within the feasible range. Ages use cell means without a
 * gender-grade interaction and cell variances solved from the four margin
 * SDs; the mean and SD targets sit inside their rounding intervals so both
 * margins hold simultaneously.
 */
inline Cohort glioma_marginals_fixture() {
    // cell order: male LGG, male GBM, female LGG, female GBM
    constexpr std::array<int, 4> size{216, 135, 271, 217};
    constexpr int n_lgg = 487, n_gbm = 352, n_male = 351;

    const double total_age = 42734.9;
    const double mean_gbm = 60.704;
    const double mean_lgg = (total_age - n_gbm * mean_gbm) / n_lgg;
    const double mean_male = 50.634;
    const double sd_lgg = 13.26, sd_gbm = 13.43, sd_male = 15.57;
    // The female SD is implied by the other three margins (about 15.8065).

    auto cell_means = [&](double d) {
        std::array<double, 4> mu{};
        mu[0] = d;
        mu[2] = (n_lgg * mean_lgg - size[0] * d) / size[2];
        mu[1] = (n_male * mean_male - size[0] * d) / size[1];
        mu[3] = (n_gbm * mean_gbm - size[1] * mu[1]) / size[3];
        return mu;
    };
    auto interaction = [&](double d) {
        const auto mu = cell_means(d);
        return (mu[0] - mu[2]) - (mu[1] - mu[3]);
    };
    const double f0 = interaction(0.0);
    const double f1 = interaction(1.0);
    const auto mu = cell_means(-f0 / (f1 - f0));

    const double ss_lgg = (n_lgg - 1) * sd_lgg * sd_lgg - size[0] * std::pow(mu[0] - mean_lgg, 2) - size[2] * std::pow(mu[2] - mean_lgg, 2);
    const double ss_gbm = (n_gbm - 1) * sd_gbm * sd_gbm - size[1] * std::pow(mu[1] - mean_gbm, 2) - size[3] * std::pow(mu[3] - mean_gbm, 2);
    const double ss_male = (n_male - 1) * sd_male * sd_male - size[0] * std::pow(mu[0] - mean_male, 2) - size[1] * std::pow(mu[1] - mean_male, 2);
    std::array<double, 4> var{};
    var[0] = ss_lgg / ((size[0] - 1) + (size[2] - 1));  // equal variance in the two LGG cells
    var[2] = var[0];
    var[1] = (ss_male - (size[0] - 1) * var[0]) / (size[1] - 1);
    var[3] = (ss_gbm - (size[1] - 1) * var[1]) / (size[3] - 1);

    RandomStream rng(20240839);
    const auto schema = glioma_schema();
    const auto age = schema.index_of("Age");
    const auto gender = schema.index_of("Gender");
    const auto grade = schema.index_of("Grade");

    std::array<std::vector<PatientRecord>, 4> cells;
    for (std::size_t c = 0; c < 4; ++c) {
        const auto z = detail::standardized_spread(static_cast<std::size_t>(size[c]), rng);
        for (int i = 0; i < size[c]; ++i) {
            PatientRecord rec;
            rec.values.assign(schema.size(), 0.0);
            rec.values[age] = mu[c] + std::sqrt(var[c]) * z[static_cast<std::size_t>(i)];
            rec.values[gender] = c < 2 ? 1.0 : 0.0;
            rec.values[grade] = c % 2 == 1 ? 1.0 : 0.0;
            cells[c].push_back(std::move(rec));
        }
    }

    for (const auto& m : glioma_marker_margins) {
        const auto col = schema.index_of(m.name);
        // x = male-LGG count; the other cells follow from the margins.
        const int lo = std::max({0, m.lgg - size[2], m.male - size[1], m.male - m.gbm});
        const int hi = std::min({size[0], m.male, m.lgg, size[3] - m.gbm + m.male});
        const int x = std::clamp(static_cast<int>(std::lround(static_cast<double>(m.male) * m.lgg / m.total)), lo, hi);
        const std::array<int, 4> counts{x, m.male - x, m.lgg - x, m.gbm - m.male + x};
        for (std::size_t c = 0; c < 4; ++c) {
            auto order = rng.permutation(cells[c].size());
            for (int i = 0; i < counts[c]; ++i) {
                cells[c][order[static_cast<std::size_t>(i)]].values[col] = 1.0;
            }
        }
    }

    std::vector<PatientRecord> records;
    for (auto& cell : cells) {
        for (auto& rec : cell) {
            records.push_back(std::move(rec));
        }
    }
    rng.shuffle(records);
    return Cohort(schema, std::move(records));
}

}

#endif
