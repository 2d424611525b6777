#include <gtest/gtest.h>

#include "psm/balance.hpp"
#include "psm/synth.hpp"

TEST(Synth, SameSeedSameCohort) {
    const auto cfg = psm::glioma_like_config(839, 12);
    EXPECT_EQ(psm::generate(cfg).cohort, psm::generate(cfg).cohort);
    auto other = cfg;
    other.seed = 13;
    EXPECT_NE(psm::generate(cfg).cohort, psm::generate(other).cohort);
}

TEST(Synth, PrevalencesFollowTheConfig) {
    auto cfg = psm::no_confounding_config(200000, 3);
    const auto g = psm::generate(cfg);
    for (std::size_t j = 0; j < cfg.covariates.size(); ++j) {
        const auto col = g.cohort.column(j);
        const auto& spec = cfg.covariates[j];
        if (spec.kind == psm::Kind::binary) {
            EXPECT_NEAR(psm::stats::mean(col), spec.prevalence, 0.005) << spec.name;
        } else {
            EXPECT_NEAR(psm::stats::mean(col), spec.mean, 0.01 * spec.sd) << spec.name;
            EXPECT_NEAR(psm::stats::sd(col), spec.sd, 0.01 * spec.sd) << spec.name;
        }
    }
}

TEST(Synth, NaiveBiasMatchesQuadratureOracle) {
    // Treated share and E[Y|T=1] - E[Y|T=0] for the strong-confounding
    // generator, computed offline by quadrature over Z and B.
    const auto g = psm::generate(psm::strong_confounding_config(1000000, 21));
    EXPECT_NEAR(psm::stats::mean(g.cohort.treatment()), 0.50360377, 0.003);
    EXPECT_NEAR(psm::naive_difference(g.cohort), 0.20996027, 0.01);
    EXPECT_NEAR(g.truth, 0.0, 1e-15);
}

TEST(Synth, RiskScaleTruthIsExact) {
    auto cfg = psm::glioma_like_config(2000, 2);
    const auto g = psm::generate(cfg);
    EXPECT_NEAR(g.truth, cfg.true_effect, 1e-12);
    EXPECT_NEAR(g.truth_att, cfg.true_effect, 1e-12);
    for (double linear : {-40.0, -2.0, 0.0, 3.0, 40.0}) {
        for (double tau : {-0.6, -0.1, 0.2, 0.9}) {
            cfg.true_effect = tau;
            const auto [p0, p1] = psm::potential_outcome_probabilities(cfg, linear);
            EXPECT_GE(p0, 0.0);
            EXPECT_LE(p1, 1.0);
            EXPECT_GE(p1, 0.0);
            EXPECT_NEAR(p1 - p0, tau, 1e-12);
        }
    }
}

TEST(Synth, NoConfoundingLeavesCovariatesBalanced) {
    const auto g = psm::generate(psm::no_confounding_config(20000, 6));
    for (const auto& row : psm::balance_rows(g.cohort)) {
        EXPECT_LT(row.smd(), 0.05) << row.covariate;
    }
}

TEST(Synth, ConfigValidation) {
    auto cfg = psm::no_confounding_config();
    cfg.outcome_coefficients.pop_back();
    EXPECT_THROW(psm::generate(cfg), psm::Error);
    cfg = psm::no_confounding_config();
    cfg.true_effect = 1.5;
    EXPECT_THROW(psm::generate(cfg), psm::Error);
    cfg = psm::no_confounding_config();
    cfg.n = 5;
    EXPECT_THROW(psm::generate(cfg), psm::Error);
}

TEST(Synth, GeneratedCohortRoundTripsThroughCsv) {
    const auto cfg = psm::strong_confounding_config(500, 9);
    const auto g = psm::generate(cfg);
    std::ostringstream out;
    psm::write_csv(out, g.cohort);
    std::istringstream in(out.str());
    EXPECT_EQ(psm::load_cohort(in, cfg.schema()), g.cohort);
}

TEST(Fixture, ReproducesPublishedMargins) {
    const auto c = psm::glioma_marginals_fixture();
    ASSERT_EQ(c.size(), 839u);
    const auto d = psm::describe(c, "Grade");
    EXPECT_EQ(d.stratum_sizes, (std::vector<std::size_t>{839, 487, 352}));
    for (const auto& m : psm::glioma_marker_margins) {
        const auto& e = d.entry(m.name);
        EXPECT_EQ(static_cast<int>(e.cells[0].count), m.total) << m.name;
        EXPECT_EQ(static_cast<int>(e.cells[1].count), m.lgg) << m.name;
        EXPECT_EQ(static_cast<int>(e.cells[2].count), m.gbm) << m.name;
    }
    EXPECT_EQ(d.entry("Gender").cells[0].count, 351u);
    const auto& age = d.entry("Age");
    EXPECT_NEAR(age.cells[0].mean, 50.94, 0.005);
    EXPECT_NEAR(age.cells[0].sd, 15.70, 0.005);
    EXPECT_NEAR(age.cells[1].mean, 43.87, 0.005);
    EXPECT_NEAR(age.cells[1].sd, 13.26, 0.005);
    EXPECT_NEAR(age.cells[2].mean, 60.70, 0.005);
    EXPECT_NEAR(age.cells[2].sd, 13.43, 0.005);
    for (double v : c.column("Age")) {
        EXPECT_GE(v, 18.0);
    }
}

TEST(BiasStudy, RequiresTenSeeds) {
    EXPECT_THROW(psm::bias_study(psm::no_confounding_config(), 5), psm::Error);
}
