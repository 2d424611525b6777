#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "psm/balance.hpp"
#include "psm/pipeline.hpp"
#include "psm/synth.hpp"

namespace {

std::vector<double> ones_then_zeros(std::size_t ones, std::size_t n) {
    std::vector<double> v(n, 0.0);
    std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(ones), 1.0);
    return v;
}

}

TEST(Smd, ZeroOnIdenticalGroups) {
    const std::vector<double> a{1.5, 2.5, 3.0, 7.25};
    EXPECT_EQ(psm::smd(a, a, psm::Kind::continuous), 0.0);
    const auto b = ones_then_zeros(3, 7);
    EXPECT_EQ(psm::smd(b, b, psm::Kind::binary), 0.0);
}

TEST(Smd, BinarySixtyVersusForty) {
    const auto t = ones_then_zeros(6, 10);
    const auto c = ones_then_zeros(4, 10);
    EXPECT_NEAR(psm::smd(t, c, psm::Kind::binary), 0.4082, 1e-4);
    EXPECT_NEAR(psm::smd(t, c, psm::Kind::binary), 0.2 / std::sqrt(0.24), 1e-12);
}

TEST(Smd, Antisymmetric) {
    const std::vector<double> a{1, 4, 2, 8, 5};
    const std::vector<double> b{3, 3, 9, 1};
    EXPECT_DOUBLE_EQ(psm::smd(a, b, psm::Kind::continuous), -psm::smd(b, a, psm::Kind::continuous));
    const auto t = ones_then_zeros(2, 9);
    const auto c = ones_then_zeros(5, 8);
    EXPECT_DOUBLE_EQ(psm::smd(t, c, psm::Kind::binary), -psm::smd(c, t, psm::Kind::binary));
}

TEST(Smd, ContinuousIsAffineInvariant) {
    const std::vector<double> a{1, 4, 2, 8, 5};
    const std::vector<double> b{3, 3, 9, 1};
    const double base = psm::smd(a, b, psm::Kind::continuous);
    for (double scale : {0.01, 3.0, 1000.0}) {
        std::vector<double> sa;
        std::vector<double> sb;
        for (double v : a) {
            sa.push_back(scale * v + 17.0);
        }
        for (double v : b) {
            sb.push_back(scale * v + 17.0);
        }
        EXPECT_NEAR(psm::smd(sa, sb, psm::Kind::continuous), base, 1e-12);
        std::vector<double> na = sa;
        std::vector<double> nb = sb;
        for (auto& v : na) {
            v = -v;
        }
        for (auto& v : nb) {
            v = -v;
        }
        EXPECT_NEAR(psm::smd(na, nb, psm::Kind::continuous), -base, 1e-12);
    }
}

TEST(Smd, PooledVarianceWeightsByDegreesOfFreedom) {
    const std::vector<double> a{0, 2};          // mean 1, var 2
    const std::vector<double> b{4, 5, 6, 7, 8};  // mean 6, var 2.5
    const double pooled = (1 * 2.0 + 4 * 2.5) / 5.0;
    EXPECT_NEAR(psm::smd(a, b, psm::Kind::continuous), -5.0 / std::sqrt(pooled), 1e-12);
}

TEST(Smd, Degenerate) {
    const std::vector<double> z{0, 0, 0};
    const std::vector<double> o{1, 1};
    EXPECT_THROW(psm::smd(z, o, psm::Kind::binary), psm::Error);
    EXPECT_EQ(psm::smd(z, z, psm::Kind::binary), 0.0);
    EXPECT_THROW(psm::smd({}, o, psm::Kind::binary), psm::Error);
    const std::vector<double> two{0, 2};
    EXPECT_THROW(psm::smd(two, o, psm::Kind::binary), psm::Error);
}

TEST(Balance, FixtureBeforeMatchingValues) {
    const auto rows = psm::balance_rows(psm::glioma_marginals_fixture());
    const std::map<std::string, double> expected{
        {"Age", 0.033}, {"IDH1", 0.098}, {"ATRX", 0.114}, {"PTEN", 0.065}, {"EGFR", 0.070}, {"CIC", 0.124}, {"BCOR", 0.158},
        {"MUC16", 0.031}, {"PIK3R1", 0.112}, {"PDGFRA", 0.055}, {"CSMD3", 0.075}, {"IDH2", 0.041}, {"FAT4", 0.131},
    };
    ASSERT_EQ(rows.size(), expected.size());
    for (const auto& row : rows) {
        EXPECT_NEAR(row.smd(), expected.at(row.covariate), 1e-3) << row.covariate;
    }
}

TEST(Balance, ReportRowsAndThreshold) {
    const auto c = psm::glioma_marginals_fixture();
    psm::PipelineSettings settings;
    settings.seed = 3;
    psm::BootstrapConfig boot;
    boot.replicates = 200;
    const auto result = psm::run_pipeline(c, settings, boot);
    ASSERT_TRUE(result.matched);
    const auto report = psm::balance_report(c, *result.matched, 0.1);
    EXPECT_EQ(report.before.size(), report.after.size());
    double worst = 0;
    for (std::size_t i = 0; i < report.after.size(); ++i) {
        EXPECT_EQ(report.before[i].covariate, report.after[i].covariate);
        worst = std::max(worst, report.after[i].smd());
    }
    EXPECT_EQ(report.max_after_smd, worst);
    EXPECT_EQ(report.balanced, worst <= 0.1);
    const auto strict = psm::balance_report(c, *result.matched, worst / 2);
    EXPECT_FALSE(strict.balanced);
}

TEST(Balance, SchemaMismatchThrows) {
    const auto c = psm::glioma_marginals_fixture();
    const auto other = psm::generate(psm::no_confounding_config(100, 1)).cohort;
    EXPECT_THROW(psm::balance_report(c, other), psm::Error);
}

TEST(Histograms, CountsAddUp) {
    const auto ps = psm::PropensityScores::from_values({0.02, 0.51, 0.99, 0.5, 0.05}, std::vector<double>{1, 1, 1, 0, 0});
    psm::MatchedSample s;
    s.pairs = {{1, 3, 0.01}};
    const auto h = psm::ps_histograms(ps, s, 10);
    EXPECT_EQ(h.counts[0][0][0], 1u);
    EXPECT_EQ(h.counts[0][0][5], 1u);
    EXPECT_EQ(h.counts[0][0][9], 1u);
    EXPECT_EQ(h.counts[1][0][5], 1u);
    EXPECT_EQ(h.counts[1][0][0], 1u);
    EXPECT_EQ(h.counts[0][1][5], 1u);
    EXPECT_EQ(h.counts[1][1][5], 1u);
    EXPECT_EQ(psm::ScoreHistograms::bin_of(1.0, 10), 9u);
    EXPECT_DOUBLE_EQ(h.total_variation(1), 0.0);
    EXPECT_THROW(psm::ps_histograms(ps, s, 1), psm::Error);
}

TEST(Histograms, MatchingReducesDistributionGap) {
    const auto g = psm::generate(psm::strong_confounding_config(2000, 4));
    psm::PipelineSettings settings;
    settings.seed = 4;
    const auto ps = psm::score(g.cohort, psm::fit_propensity(g.cohort));
    const auto m = psm::match(ps, psm::Caliper::from_scores(ps, 0.25), psm::forward_options(settings));
    const auto h = psm::ps_histograms(ps, m);
    EXPECT_LT(h.total_variation(1), h.total_variation(0));
}

TEST(Balance, CsvAndSvgOutputs) {
    const auto c = psm::glioma_marginals_fixture();
    const auto report = psm::balance_report(c, c);
    std::ostringstream csv;
    psm::write_balance_csv(csv, report);
    const auto text = csv.str();
    EXPECT_EQ(text.rfind("panel,covariate,", 0), 0u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 27);
    std::ostringstream svg;
    psm::write_loveplot_svg(svg, report);
    EXPECT_NE(svg.str().find("<svg"), std::string::npos);
    EXPECT_NE(svg.str().find("stroke-dasharray"), std::string::npos);
    EXPECT_NE(svg.str().find("BCOR"), std::string::npos);
}
