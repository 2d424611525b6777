#include <gtest/gtest.h>

#include "psm/logit.hpp"
#include "support/oracles.hpp"

namespace {

// Eight-row fixture solved offline by a zoomed grid over the slopes with the
// intercept fixed by bisection on its score equation.
psm::DesignMatrix eight_row_design() {
    Eigen::MatrixXd x(8, 2);
    x << 0.5, 1, -1.2, 0, 1.7, 1, 0.3, 1, -0.4, 0, 2.1, 0, -1.5, 1, 0.9, 0;
    Eigen::VectorXd y(8);
    y << 1, 0, 1, 0, 0, 1, 1, 0;
    return psm::DesignMatrix(x, y, {"x1", "x2"});
}

psm::DesignMatrix from_oracle(const oracle::Design& d) {
    return psm::DesignMatrix(d.x.rightCols(d.x.cols() - 1), d.y);
}

}

TEST(Logit, InterceptOnlyMatchesLogOdds) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(839, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(839);
    y.head(351).setOnes();
    const auto f = psm::fit(psm::DesignMatrix(x, y));
    EXPECT_TRUE(f.converged);
    EXPECT_NEAR(f.coefficients[0], std::log(351.0 / 488.0), 1e-10);
    EXPECT_NEAR(f.coefficients[0], -0.3295, 1e-4);
    EXPECT_EQ(f.coefficients[1], 0.0);
    EXPECT_TRUE(std::isnan(f.standard_errors[1]));
}

TEST(Logit, EightRowFixtureMatchesFrozenOracle) {
    const auto f = psm::fit(eight_row_design());
    ASSERT_TRUE(f.converged);
    EXPECT_NEAR(f.coefficients[0], -1.67471110, 1e-6);
    EXPECT_NEAR(f.coefficients[1], 0.85746467, 1e-6);
    EXPECT_NEAR(f.coefficients[2], 2.77662799, 1e-6);
    EXPECT_NEAR(f.log_likelihood, -3.8097794172, 1e-8);
    EXPECT_NEAR(f.standard_errors[0], 1.4896207, 1e-5);
    EXPECT_NEAR(f.standard_errors[1], 0.80015314, 1e-5);
    EXPECT_NEAR(f.standard_errors[2], 2.0310167, 1e-5);
    EXPECT_LE(f.gradient_max_norm, 1e-6);
    EXPECT_EQ(f.names, (std::vector<std::string>{"(intercept)", "x1", "x2"}));
}

TEST(Logit, MatchesBisectionOracleOnRandomDesigns) {
    int checked = 0;
    for (std::uint64_t seed = 1; checked < 25 && seed < 200; ++seed) {
        const auto d = oracle::random_design(seed, 30 + seed % 21, 1 + seed % 3);
        psm::LogisticFit f;
        try {
            f = psm::fit(from_oracle(d));
        } catch (const psm::Error&) {
            continue;
        }
        if (!f.converged || f.separation) {
            continue;
        }
        const auto beta = oracle::logit_by_bisection(d.x, d.y);
        for (Eigen::Index j = 0; j < beta.size(); ++j) {
            EXPECT_NEAR(f.coefficients[j], beta[j], 1e-4) << "seed " << seed << " coef " << j;
        }
        EXPECT_LE(f.gradient_max_norm, 1e-6);
        ++checked;
    }
    EXPECT_GE(checked, 20);
}

TEST(Logit, ScoreMatchesFiniteDifferences) {
    const auto design = eight_row_design();
    Eigen::VectorXd beta(3);
    beta << 0.3, -0.7, 1.1;
    const auto g = psm::score_vector(design, beta);
    for (Eigen::Index j = 0; j < 3; ++j) {
        const double h = 1e-6;
        Eigen::VectorXd up = beta;
        Eigen::VectorXd down = beta;
        up[j] += h;
        down[j] -= h;
        const double fd = (psm::log_likelihood(design, up) - psm::log_likelihood(design, down)) / (2 * h);
        EXPECT_NEAR(g[j], fd, 1e-4);
    }
}

TEST(Logit, LogLikelihoodNeverDecreases) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto f = psm::fit(from_oracle(oracle::random_design(seed * 31, 50, 3)));
        for (std::size_t i = 1; i < f.log_likelihood_trace.size(); ++i) {
            EXPECT_GE(f.log_likelihood_trace[i], f.log_likelihood_trace[i - 1] - 1e-12);
        }
    }
}

TEST(Logit, FlippingLabelsNegatesCoefficients) {
    const auto d = eight_row_design();
    Eigen::VectorXd flipped = Eigen::VectorXd::Ones(d.y().size()) - d.y();
    const auto a = psm::fit(d);
    const auto b = psm::fit(psm::DesignMatrix(d.x().rightCols(2), flipped));
    for (Eigen::Index j = 0; j < 3; ++j) {
        EXPECT_NEAR(a.coefficients[j], -b.coefficients[j], 1e-8);
        EXPECT_NEAR(a.standard_errors[j], b.standard_errors[j], 1e-8);
    }
}

TEST(Logit, RescalingACovariateRescalesItsSlope) {
    const auto d = eight_row_design();
    Eigen::MatrixXd x = d.x().rightCols(2);
    x.col(0) *= 10.0;
    const auto a = psm::fit(d);
    const auto b = psm::fit(psm::DesignMatrix(x, d.y()));
    EXPECT_NEAR(b.coefficients[1], a.coefficients[1] / 10.0, 1e-8);
    EXPECT_NEAR(b.coefficients[0], a.coefficients[0], 1e-8);
    EXPECT_NEAR(b.log_likelihood, a.log_likelihood, 1e-10);
}

TEST(Logit, SeparationIsFlaggedNotThrown) {
    Eigen::MatrixXd x(6, 1);
    x << -3, -2, -1, 1, 2, 3;
    Eigen::VectorXd y(6);
    y << 0, 0, 0, 1, 1, 1;
    const auto f = psm::fit(psm::DesignMatrix(x, y));
    EXPECT_TRUE(f.separation);
}

TEST(Logit, Errors) {
    Eigen::MatrixXd x(4, 2);
    x << 1, 2, 2, 4, 3, 6, 4, 8;  // collinear
    Eigen::VectorXd y(4);
    y << 0, 1, 0, 1;
    try {
        psm::fit(psm::DesignMatrix(x, y));
        FAIL();
    } catch (const psm::Error& e) {
        EXPECT_TRUE(e.code() == psm::ErrorCode::Singular || e.code() == psm::ErrorCode::DimensionMismatch);
    }
    Eigen::VectorXd same = Eigen::VectorXd::Ones(4);
    EXPECT_THROW(psm::fit(psm::DesignMatrix(x.leftCols(1), same)), psm::Error);
    Eigen::VectorXd bad(4);
    bad << 0, 2, 0, 1;
    EXPECT_THROW(psm::DesignMatrix(x, bad), psm::Error);
}

TEST(Logit, CollinearColumnsAreSingular) {
    Eigen::MatrixXd x(10, 2);
    Eigen::VectorXd y(10);
    for (int i = 0; i < 10; ++i) {
        x(i, 0) = i;
        x(i, 1) = 2.0 * i;
        y[i] = (i * 7 % 3 == 0) ? 1 : 0;
    }
    try {
        psm::fit(psm::DesignMatrix(x, y));
        FAIL();
    } catch (const psm::Error& e) {
        EXPECT_EQ(e.code(), psm::ErrorCode::Singular);
    }
}

TEST(Logit, PredictUsesTheLinearPredictor) {
    psm::LogisticFit f;
    f.coefficients = Eigen::VectorXd(3);
    f.coefficients << -1.0, 0.5, 0.25;
    const double rec[] = {1.0, 0.0};
    EXPECT_NEAR(psm::predict(f, rec), 0.37754, 1e-5);
    const double extreme[] = {1e6, 0.0};
    EXPECT_LT(psm::predict(f, extreme), 1.0);
    EXPECT_GT(psm::predict(f, extreme), 0.0);
}

TEST(Logit, WaldExamples) {
    const auto zero = psm::wald(0.0, 0.5);
    EXPECT_DOUBLE_EQ(zero.p_value, 1.0);
    const auto w = psm::wald(0.727, 0.3515);
    EXPECT_NEAR(std::exp(w.ci_low), 1.039, 5e-3);
    EXPECT_NEAR(std::exp(w.ci_high), 4.118, 5e-3);
    EXPECT_NEAR(psm::wald(1.0, 0.5).p_value, 0.0455, 1e-4);
    EXPECT_THROW(psm::wald(1.0, 0.0), psm::Error);
    EXPECT_THROW(psm::wald(1.0, std::nan("")), psm::Error);
}
