#ifndef PSM_LOGIT_HPP
#define PSM_LOGIT_HPP

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cohort.hpp"
#include "error.hpp"
#include "stats.hpp"

/**
 * @file logit.hpp
 * @brief Binary logistic regression fitted by Newton/IRLS.
 *
 * Used for the propensity model (treatment on covariates) and for the
 * outcome model behind the odds ratio (outcome on treatment).
 */

namespace psm {

/**
 * Design matrix with a leading intercept column of ones, plus a 0/1
 * response. Column names are carried along for reporting.
 */
class DesignMatrix {
public:
    DesignMatrix(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& response, std::vector<std::string> names = {}) :
        x_(covariates.rows(), covariates.cols() + 1), y_(response)
    {
        if (covariates.rows() != response.size()) {
            throw Error(ErrorCode::DimensionMismatch, "response length differs from row count");
        }
        x_.col(0).setOnes();
        x_.rightCols(covariates.cols()) = covariates;
        for (Eigen::Index i = 0; i < y_.size(); ++i) {
            if (y_[i] != 0.0 && y_[i] != 1.0) {
                throw Error(ErrorCode::BadValue, "response entries must be 0 or 1");
            }
        }
        if (names.empty()) {
            for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
                names.push_back("x" + std::to_string(j + 1));
            }
        }
        if (names.size() != static_cast<std::size_t>(covariates.cols())) {
            throw Error(ErrorCode::DimensionMismatch, "one name per covariate column expected");
        }
        names_.push_back("(intercept)");
        names_.insert(names_.end(), names.begin(), names.end());
    }

    static DesignMatrix from_cohort(const Cohort& cohort, std::span<const std::size_t> predictors, std::size_t response) {
        const auto n = static_cast<Eigen::Index>(cohort.size());
        Eigen::MatrixXd cov(n, static_cast<Eigen::Index>(predictors.size()));
        Eigen::VectorXd y(n);
        std::vector<std::string> names;
        for (auto p : predictors) {
            names.push_back(cohort.schema()[p].name);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& rec = cohort.records()[static_cast<std::size_t>(i)].values;
            for (std::size_t j = 0; j < predictors.size(); ++j) {
                cov(i, static_cast<Eigen::Index>(j)) = rec[predictors[j]];
            }
            y[i] = rec[response];
        }
        return DesignMatrix(cov, y, std::move(names));
    }

    const Eigen::MatrixXd& x() const { return x_; }
    const Eigen::VectorXd& y() const { return y_; }
    Eigen::Index rows() const { return x_.rows(); }
    Eigen::Index parameters() const { return x_.cols(); }
    const std::vector<std::string>& names() const { return names_; }

private:
    Eigen::MatrixXd x_;
    Eigen::VectorXd y_;
    std::vector<std::string> names_;
};

struct FitOptions {
    double tolerance = 1e-8;          // relative log-likelihood change
    int max_iterations = 25;
    double gradient_tolerance = 1e-6; // max-norm of the score at convergence
    double divergence_bound = 15.0;   // |coefficient| above this flags separation
    bool step_halving = true;
};

struct LogisticFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    std::vector<std::string> names;
    int iterations = 0;
    bool converged = false;
    bool separation = false;
    double log_likelihood = 0;
    double gradient_max_norm = 0;
    std::vector<double> log_likelihood_trace;

    /// Columns that are identically zero; their coefficients are pinned at 0.
    std::vector<bool> inactive;

    std::size_t predictors() const { return static_cast<std::size_t>(coefficients.size()) - 1; }
};

/// Bernoulli log-likelihood at `beta`, evaluated with a stable softplus.
inline double log_likelihood(const DesignMatrix& design, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = design.x() * beta;
    double total = 0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double e = eta[i];
        const double softplus = std::max(e, 0.0) + std::log1p(std::exp(-std::abs(e)));
        total += design.y()[i] * e - softplus;
    }
    return total;
}

inline Eigen::VectorXd score_vector(const DesignMatrix& design, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = design.x() * beta;
    Eigen::VectorXd resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        resid[i] = design.y()[i] - stats::sigmoid(eta[i]);
    }
    return design.x().transpose() * resid;
}

namespace detail {

inline Eigen::MatrixXd information(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double p = stats::sigmoid(eta[i]);
        w[i] = p * (1 - p);
    }
    return x.transpose() * w.asDiagonal() * x;
}

inline bool nearly_singular(const Eigen::LDLT<Eigen::MatrixXd>& ldlt) {
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        return true;
    }
    const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
    return d.minCoeff() <= 1e-12 * d.maxCoeff();
}

}

/**
 * Maximizes the log-likelihood with Newton steps (equivalently IRLS),
 * halving a step whenever it would lower the likelihood.
 *
 * Convergence requires both a relative log-likelihood change below
 * `tolerance` and a score max-norm below `gradient_tolerance`. If a
 * coefficient leaves [-divergence_bound, divergence_bound] the fit stops
 * and is returned with `separation` set instead of throwing. Standard
 * errors come from the inverse observed information at the optimum.
 */
inline LogisticFit fit(const DesignMatrix& design, const FitOptions& options = {}) {
    const auto n = design.rows();
    const auto p = design.parameters();
    if (n <= p) {
        throw Error(ErrorCode::DimensionMismatch, "need more rows than parameters");
    }
    const double ybar = design.y().mean();
    if (ybar == 0.0 || ybar == 1.0) {
        throw Error(ErrorCode::EmptyGroup, "response has a single class");
    }

    std::vector<bool> inactive(static_cast<std::size_t>(p), false);
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < p; ++j) {
        inactive[static_cast<std::size_t>(j)] = design.x().col(j).isZero(0.0);
        if (!inactive[static_cast<std::size_t>(j)]) {
            active.push_back(j);
        }
    }
    const auto q = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd xa(n, q);
    for (Eigen::Index j = 0; j < q; ++j) {
        xa.col(j) = design.x().col(active[static_cast<std::size_t>(j)]);
    }
    auto expand = [&](const Eigen::VectorXd& reduced, double fill) {
        Eigen::VectorXd full = Eigen::VectorXd::Constant(p, fill);
        for (Eigen::Index j = 0; j < q; ++j) {
            full[active[static_cast<std::size_t>(j)]] = reduced[j];
        }
        return full;
    };

    LogisticFit out;
    out.names = design.names();
    out.inactive = inactive;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
    beta[0] = stats::logit(ybar);
    double ll = log_likelihood(design, expand(beta, 0.0));
    out.log_likelihood_trace.push_back(ll);

    double grad_norm = std::numeric_limits<double>::infinity();
    double rel_change = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        const Eigen::VectorXd full = expand(beta, 0.0);
        Eigen::VectorXd grad(q);
        {
            const Eigen::VectorXd g = score_vector(design, full);
            for (Eigen::Index j = 0; j < q; ++j) {
                grad[j] = g[active[static_cast<std::size_t>(j)]];
            }
        }
        grad_norm = grad.cwiseAbs().maxCoeff();
        if (rel_change < options.tolerance && grad_norm <= options.gradient_tolerance) {
            out.converged = true;
            break;
        }

        Eigen::LDLT<Eigen::MatrixXd> ldlt(detail::information(xa, beta));
        if (detail::nearly_singular(ldlt)) {
            throw Error(ErrorCode::Singular, "information matrix is not invertible");
        }
        const Eigen::VectorXd step = ldlt.solve(grad);

        double scale = 1.0;
        Eigen::VectorXd candidate = beta + step;
        double ll_new = log_likelihood(design, expand(candidate, 0.0));
        if (options.step_halving) {
            for (int h = 0; h < 30 && !(ll_new >= ll - 1e-12 * std::abs(ll)); ++h) {
                scale *= 0.5;
                candidate = beta + scale * step;
                ll_new = log_likelihood(design, expand(candidate, 0.0));
            }
        }
        rel_change = std::abs(ll_new - ll) / (std::abs(ll_new) + 0.1);
        beta = candidate;
        ll = ll_new;
        out.log_likelihood_trace.push_back(ll);
        out.iterations = iter + 1;

        if (beta.cwiseAbs().maxCoeff() > options.divergence_bound) {
            out.separation = true;
            break;
        }
    }

    const Eigen::VectorXd full = expand(beta, 0.0);
    if (!out.converged && !out.separation) {
        // The loop may exit on the iteration cap right after reaching the optimum.
        const Eigen::VectorXd g = score_vector(design, full);
        grad_norm = g.cwiseAbs().maxCoeff();
        out.converged = rel_change < options.tolerance && grad_norm <= options.gradient_tolerance;
    } else {
        grad_norm = score_vector(design, full).cwiseAbs().maxCoeff();
    }
    out.coefficients = full;
    out.log_likelihood = ll;
    out.gradient_max_norm = grad_norm;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(detail::information(xa, beta));
    Eigen::VectorXd se_active = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::quiet_NaN());
    if (!detail::nearly_singular(ldlt)) {
        const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(q, q));
        se_active = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    } else if (!out.separation) {
        throw Error(ErrorCode::Singular, "information matrix is not invertible at the optimum");
    }
    out.standard_errors = expand(se_active, std::numeric_limits<double>::quiet_NaN());

    if (!out.converged && !out.separation) {
        throw Error(ErrorCode::NotConverged, "no convergence within " + std::to_string(options.max_iterations) + " iterations");
    }
    return out;
}

inline double linear_predictor(const LogisticFit& fit, std::span<const double> record) {
    if (record.size() != fit.predictors()) {
        throw Error(ErrorCode::DimensionMismatch, "record has " + std::to_string(record.size()) + " values, fit expects " + std::to_string(fit.predictors()));
    }
    double eta = fit.coefficients[0];
    for (std::size_t j = 0; j < record.size(); ++j) {
        eta += fit.coefficients[static_cast<Eigen::Index>(j + 1)] * record[j];
    }
    return eta;
}

/// Probability in the open interval (0, 1); the linear predictor is clamped to [-36, 36].
inline double predict(const LogisticFit& fit, std::span<const double> record) {
    const double eta = std::clamp(linear_predictor(fit, record), -36.0, 36.0);
    return stats::sigmoid(eta);
}

struct WaldResult {
    double z = 0;
    double p_value = 1;
    double ci_low = 0;
    double ci_high = 0;
};

/// Wald z-test and 95% interval for one coefficient.
inline WaldResult wald(double coefficient, double se) {
    if (!std::isfinite(se) || se <= 0) {
        throw Error(ErrorCode::DegenerateSE, "standard error must be positive and finite");
    }
    WaldResult out;
    out.z = coefficient / se;
    out.p_value = stats::normal_two_sided_p(out.z);
    out.ci_low = coefficient - stats::z975 * se;
    out.ci_high = coefficient + stats::z975 * se;
    return out;
}

inline WaldResult wald_test(const LogisticFit& fit, std::size_t index) {
    if (index >= static_cast<std::size_t>(fit.coefficients.size())) {
        throw Error(ErrorCode::IndexOutOfRange, "coefficient " + std::to_string(index));
    }
    const auto i = static_cast<Eigen::Index>(index);
    return wald(fit.coefficients[i], fit.standard_errors[i]);
}

}

#endif
