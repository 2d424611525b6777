#ifndef PSM_BALANCE_HPP
#define PSM_BALANCE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cohort.hpp"
#include "error.hpp"
#include "matcher.hpp"
#include "stats.hpp"

/**
 * @file balance.hpp
 * @brief Standardized mean differences, balance tables and score histograms.
 */

namespace psm {

/**
 * Signed standardized mean difference (treated minus control).
 *
 * The denominator is the square root of the degrees-of-freedom weighted
 * pooled variance ((n_t - 1) v_t + (n_c - 1) v_c) / (n_t + n_c - 2), with
 * v = p(1 - p) for binary data and the n-1 sample variance for continuous
 * data. With equal group sizes this is the plain average (v_t + v_c) / 2.
 */
inline double smd(std::span<const double> treated, std::span<const double> control, Kind kind) {
    if (treated.empty() || control.empty()) {
        throw Error(ErrorCode::EmptyGroup, "smd needs observations in both groups");
    }
    auto group_variance = [kind](std::span<const double> x, double m) {
        if (kind == Kind::binary) {
            return m * (1.0 - m);
        }
        return stats::variance(x);
    };
    if (kind == Kind::binary) {
        for (auto group : {treated, control}) {
            for (double v : group) {
                if (v != 0.0 && v != 1.0) {
                    throw Error(ErrorCode::BadValue, "binary smd input must be 0 or 1");
                }
            }
        }
    }
    const double mt = stats::mean(treated);
    const double mc = stats::mean(control);
    const double vt = group_variance(treated, mt);
    const double vc = group_variance(control, mc);
    const auto nt = static_cast<double>(treated.size());
    const auto nc = static_cast<double>(control.size());
    const double df = nt + nc - 2.0;
    const double pooled = df > 0 ? ((nt - 1.0) * vt + (nc - 1.0) * vc) / df : 0.5 * (vt + vc);
    if (pooled <= 0.0) {
        if (mt == mc) {
            return 0.0;
        }
        throw Error(ErrorCode::ZeroVarianceUnequalMeans, "pooled variance is zero but means differ");
    }
    return (mt - mc) / std::sqrt(pooled);
}

struct GroupSummary {
    double center = 0;  // percent of 1s (binary) or mean (continuous)
    double sd = 0;      // continuous only
};

struct BalanceRow {
    std::string covariate;
    Kind kind = Kind::binary;
    GroupSummary treated;
    GroupSummary control;
    double signed_smd = 0;

    double smd() const { return std::abs(signed_smd); }
};

struct BalanceReport {
    std::vector<BalanceRow> before;
    std::vector<BalanceRow> after;
    double threshold = 0.1;
    bool balanced = false;
    double max_after_smd = 0;
};

/// One row per covariate-role column, treated against control.
inline std::vector<BalanceRow> balance_rows(const Cohort& cohort) {
    const auto& schema = cohort.schema();
    const auto t = schema.treatment_index();
    std::vector<std::size_t> treated_rows;
    std::vector<std::size_t> control_rows;
    for (std::size_t r = 0; r < cohort.size(); ++r) {
        (cohort.value(r, t) == 1.0 ? treated_rows : control_rows).push_back(r);
    }

    std::vector<BalanceRow> rows;
    for (auto c : schema.covariate_indices()) {
        std::vector<double> tv;
        std::vector<double> cv;
        for (auto r : treated_rows) {
            tv.push_back(cohort.value(r, c));
        }
        for (auto r : control_rows) {
            cv.push_back(cohort.value(r, c));
        }
        BalanceRow row;
        row.covariate = schema[c].name;
        row.kind = schema[c].kind;
        if (row.kind == Kind::binary) {
            row.treated.center = 100.0 * stats::mean(tv);
            row.control.center = 100.0 * stats::mean(cv);
        } else {
            row.treated = {stats::mean(tv), stats::sd(tv)};
            row.control = {stats::mean(cv), stats::sd(cv)};
        }
        row.signed_smd = smd(tv, cv, row.kind);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline BalanceReport balance_report(const Cohort& before, const Cohort& after, double threshold = 0.1) {
    const auto& a = before.schema().columns();
    const auto& b = after.schema().columns();
    const bool same = a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) {
        return x.name == y.name && x.kind == y.kind && x.role == y.role;
    });
    if (!same) {
        throw Error(ErrorCode::SchemaMismatch, "before and after cohorts use different schemas");
    }
    BalanceReport out;
    out.threshold = threshold;
    out.before = balance_rows(before);
    out.after = balance_rows(after);
    out.balanced = true;
    for (const auto& row : out.after) {
        out.max_after_smd = std::max(out.max_after_smd, row.smd());
        out.balanced = out.balanced && row.smd() <= threshold;
    }
    return out;
}

/// counts[group][panel][bin]; group 0 treated, 1 control; panel 0 before, 1 after matching.
struct ScoreHistograms {
    std::size_t bins = 20;
    std::array<std::array<std::vector<std::size_t>, 2>, 2> counts;

    static std::size_t bin_of(double score, std::size_t bins) {
        const auto b = static_cast<std::size_t>(std::floor(score * static_cast<double>(bins)));
        return std::min(b, bins - 1);
    }

    /// Total-variation distance between treated and control shares in one panel.
    double total_variation(std::size_t panel) const {
        double nt = 0;
        double nc = 0;
        for (std::size_t b = 0; b < bins; ++b) {
            nt += static_cast<double>(counts[0][panel][b]);
            nc += static_cast<double>(counts[1][panel][b]);
        }
        if (nt == 0 || nc == 0) {
            return 0.0;
        }
        double tv = 0;
        for (std::size_t b = 0; b < bins; ++b) {
            tv += std::abs(static_cast<double>(counts[0][panel][b]) / nt - static_cast<double>(counts[1][panel][b]) / nc);
        }
        return 0.5 * tv;
    }
};

/// Equal-width histograms over [0, 1] of treated/control scores before and after matching.
inline ScoreHistograms ps_histograms(const PropensityScores& ps, const MatchedSample& sample, std::size_t bins = 20) {
    if (bins < 2) {
        throw Error(ErrorCode::InvalidConfig, "histograms need at least two bins");
    }
    ScoreHistograms h;
    h.bins = bins;
    for (auto& group : h.counts) {
        for (auto& panel : group) {
            panel.assign(bins, 0);
        }
    }
    for (auto i : ps.treated) {
        ++h.counts[0][0][ScoreHistograms::bin_of(ps.scores[i], bins)];
    }
    for (auto i : ps.control) {
        ++h.counts[1][0][ScoreHistograms::bin_of(ps.scores[i], bins)];
    }
    for (const auto& p : sample.pairs) {
        ++h.counts[0][1][ScoreHistograms::bin_of(ps.scores[p.treated], bins)];
        ++h.counts[1][1][ScoreHistograms::bin_of(ps.scores[p.control], bins)];
    }
    return h;
}

inline void write_histograms_csv(std::ostream& out, const ScoreHistograms& h) {
    out << "group,panel,bin,lower,upper,count\n";
    const char* groups[] = {"treated", "control"};
    const char* panels[] = {"before", "after"};
    for (std::size_t g = 0; g < 2; ++g) {
        for (std::size_t p = 0; p < 2; ++p) {
            for (std::size_t b = 0; b < h.bins; ++b) {
                const double lo = static_cast<double>(b) / static_cast<double>(h.bins);
                const double hi = static_cast<double>(b + 1) / static_cast<double>(h.bins);
                out << groups[g] << ',' << panels[p] << ',' << b << ',' << detail::format_number(lo) << ','
                    << detail::format_number(hi) << ',' << h.counts[g][p][b] << '\n';
            }
        }
    }
}

inline std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

/// Group summaries and |SMD| to three decimals, before and after matching.
inline void write_balance_csv(std::ostream& out, const BalanceReport& report) {
    out << "panel,covariate,kind,treated,treated_sd,control,control_sd,smd,abs_smd\n";
    auto emit = [&](const char* panel, const std::vector<BalanceRow>& rows) {
        for (const auto& r : rows) {
            const bool cont = r.kind == Kind::continuous;
            out << panel << ',' << r.covariate << ',' << to_string(r.kind) << ','
                << fixed(r.treated.center, cont ? 2 : 3) << ',' << (cont ? fixed(r.treated.sd, 2) : "") << ','
                << fixed(r.control.center, cont ? 2 : 3) << ',' << (cont ? fixed(r.control.sd, 2) : "") << ','
                << detail::format_number(r.signed_smd) << ',' << fixed(r.smd(), 3) << '\n';
        }
    };
    emit("before", report.before);
    emit("after", report.after);
}

/// Love-plot coordinates: covariate, smd_before, smd_after, threshold (signed SMDs).
inline void write_loveplot_csv(std::ostream& out, const BalanceReport& report) {
    out << "covariate,smd_before,smd_after,threshold\n";
    for (std::size_t i = 0; i < report.before.size(); ++i) {
        const double after = i < report.after.size() ? report.after[i].signed_smd : 0.0;
        out << report.before[i].covariate << ',' << detail::format_number(report.before[i].signed_smd) << ','
            << detail::format_number(after) << ',' << detail::format_number(report.threshold) << '\n';
    }
}

/// Static love plot: one row per covariate, dots for before/after, dotted lines at +-threshold.
inline void write_loveplot_svg(std::ostream& out, const BalanceReport& report) {
    const double width = 640;
    const double left = 120;
    const double right = 20;
    const double top = 30;
    const double row_height = 22;
    const double height = top + row_height * static_cast<double>(report.before.size()) + 40;
    double extent = report.threshold * 1.5;
    for (const auto& r : report.before) {
        extent = std::max(extent, std::abs(r.signed_smd) * 1.1);
    }
    for (const auto& r : report.after) {
        extent = std::max(extent, std::abs(r.signed_smd) * 1.1);
    }
    const double plot_w = width - left - right;
    auto xpos = [&](double v) { return left + (v + extent) / (2 * extent) * plot_w; };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const double bottom = height - 30;
    out << "<line x1=\"" << xpos(0) << "\" y1=\"" << top - 10 << "\" x2=\"" << xpos(0) << "\" y2=\"" << bottom << "\" stroke=\"black\"/>\n";
    for (double t : {-report.threshold, report.threshold}) {
        out << "<line x1=\"" << fixed(xpos(t), 2) << "\" y1=\"" << top - 10 << "\" x2=\"" << fixed(xpos(t), 2) << "\" y2=\"" << bottom
            << "\" stroke=\"red\" stroke-dasharray=\"3,3\"/>\n";
    }
    for (std::size_t i = 0; i < report.before.size(); ++i) {
        const double y = top + row_height * (static_cast<double>(i) + 0.5);
        out << "<text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" font-size=\"12\" text-anchor=\"end\">" << report.before[i].covariate << "</text>\n";
        out << "<circle cx=\"" << fixed(xpos(report.before[i].signed_smd), 2) << "\" cy=\"" << y << "\" r=\"4\" fill=\"none\" stroke=\"black\"/>\n";
        if (i < report.after.size()) {
            out << "<circle cx=\"" << fixed(xpos(report.after[i].signed_smd), 2) << "\" cy=\"" << y << "\" r=\"4\" fill=\"black\"/>\n";
        }
    }
    for (double t : {-extent, 0.0, extent}) {
        out << "<text x=\"" << fixed(xpos(t), 2) << "\" y=\"" << bottom + 16 << "\" font-size=\"11\" text-anchor=\"middle\">" << fixed(t, 2) << "</text>\n";
    }
    out << "</svg>\n";
}

}

#endif
