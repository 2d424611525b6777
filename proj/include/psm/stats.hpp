#ifndef PSM_STATS_HPP
#define PSM_STATS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace psm::stats {

inline double mean(std::span<const double> x) {
    if (x.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double total = 0;
    for (double v : x) {
        total += v;
    }
    return total / static_cast<double>(x.size());
}

/// Sample variance with the n-1 denominator; 0 for a single observation.
inline double variance(std::span<const double> x) {
    if (x.size() < 2) {
        return 0.0;
    }
    const double m = mean(x);
    double ss = 0;
    for (double v : x) {
        ss += (v - m) * (v - m);
    }
    return ss / static_cast<double>(x.size() - 1);
}

inline double sd(std::span<const double> x) { return std::sqrt(variance(x)); }

/// Linear-interpolation quantile of already sorted data (Hyndman-Fan type 7).
inline double sorted_quantile(std::span<const double> sorted, double prob) {
    if (sorted.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Two-sided p-value of a standard normal statistic.
inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

inline double sigmoid(double eta) {
    if (eta >= 0) {
        return 1.0 / (1.0 + std::exp(-eta));
    }
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// 97.5% standard normal quantile.
inline constexpr double z975 = 1.959963984540054;

}

#endif
