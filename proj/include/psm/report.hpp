#ifndef PSM_REPORT_HPP
#define PSM_REPORT_HPP

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "balance.hpp"
#include "cohort.hpp"
#include "effects.hpp"
#include "error.hpp"
#include "matcher.hpp"
#include "pipeline.hpp"
#include "synth.hpp"

/**
 * @file report.hpp
 * @brief End-to-end runs driven by a `RunConfig`, with JSON/CSV/SVG outputs.
 *
 * The JSON report is the single source of truth; the text tables printed
 * by the CLI are rendered from it.
 */

namespace psm {

inline constexpr const char* version = "1.0.0";

inline const std::set<std::string>& known_outputs() {
    static const std::set<std::string> outputs{
        "report_json", "balance_csv", "pairs_csv", "histograms_csv", "loveplot_csv", "loveplot_svg"};
    return outputs;
}

struct RunConfig {
    std::string input_path;
    std::string schema_path;       // empty: bundled glioma schema
    std::string treatment_column;  // empty: schema role
    std::string outcome_column;    // empty: schema role
    double caliper_multiplier = 0.25;
    CaliperScale caliper_scale = CaliperScale::probability;
    MatchOrder match_order = MatchOrder::random;
    std::optional<std::uint64_t> seed;
    std::size_t replicates = 2000;
    BootstrapUnit bootstrap_unit = BootstrapUnit::pair;
    AteMode ate_mode = AteMode::weighted;
    double threshold = 0.1;
    std::size_t bins = 20;
    std::string output_directory;
    std::set<std::string> emit = known_outputs();
    unsigned threads = 0;

    std::string resolved_output_directory() const {
        if (!output_directory.empty()) {
            return output_directory;
        }
        if (const char* env = std::getenv("PSM_OUTPUT_DIR"); env && *env) {
            return env;
        }
        return "psm_out";
    }
};

namespace detail {

inline std::string lower(std::string s) {
    for (auto& ch : s) {
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    return s;
}

inline std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char ch : text) {
        if (ch == ',' || ch == ' ' || ch == '[' || ch == ']' || ch == '"' || ch == '\'') {
            if (!current.empty()) {
                out.push_back(current);
                current.clear();
            }
        } else {
            current += ch;
        }
    }
    if (!current.empty()) {
        out.push_back(current);
    }
    return out;
}

inline double parse_double_setting(const std::string& key, const std::string& value) {
    auto v = parse_number(value);
    if (!v) {
        throw Error(ErrorCode::InvalidConfig, key + ": expected a number, found '" + value + "'");
    }
    return *v;
}

inline std::uint64_t parse_unsigned_setting(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw Error(ErrorCode::InvalidConfig, key + ": expected a non-negative integer, found '" + value + "'");
    }
    return v;
}

}

/**
 * Applies one setting by its CLI long-option name (dashes or underscores).
 * Shared by the config-file reader and the command line.
 */
inline void apply_setting(RunConfig& config, std::string key, const std::string& value) {
    for (auto& ch : key) {
        if (ch == '-') {
            ch = '_';
        }
    }
    if (key == "input") {
        config.input_path = value;
    } else if (key == "schema") {
        config.schema_path = value;
    } else if (key == "treatment") {
        config.treatment_column = value;
    } else if (key == "outcome") {
        config.outcome_column = value;
    } else if (key == "caliper") {
        config.caliper_multiplier = detail::parse_double_setting(key, value);
    } else if (key == "caliper_scale") {
        const auto v = detail::lower(value);
        if (v != "probability" && v != "logit") {
            throw Error(ErrorCode::InvalidConfig, "caliper_scale must be probability or logit");
        }
        config.caliper_scale = v == "logit" ? CaliperScale::logit : CaliperScale::probability;
    } else if (key == "order") {
        const auto v = detail::lower(value);
        if (v != "random" && v != "descending") {
            throw Error(ErrorCode::InvalidConfig, "order must be random or descending");
        }
        config.match_order = v == "random" ? MatchOrder::random : MatchOrder::descending_ps;
    } else if (key == "seed") {
        config.seed = detail::parse_unsigned_setting(key, value);
    } else if (key == "replicates") {
        config.replicates = static_cast<std::size_t>(detail::parse_unsigned_setting(key, value));
    } else if (key == "bootstrap_unit") {
        const auto v = detail::lower(value);
        if (v != "pair" && v != "record") {
            throw Error(ErrorCode::InvalidConfig, "bootstrap_unit must be pair or record");
        }
        config.bootstrap_unit = v == "pair" ? BootstrapUnit::pair : BootstrapUnit::record;
    } else if (key == "ate_mode") {
        const auto v = detail::lower(value);
        if (v != "weighted" && v != "pooled_pairs") {
            throw Error(ErrorCode::InvalidConfig, "ate_mode must be weighted or pooled_pairs");
        }
        config.ate_mode = v == "weighted" ? AteMode::weighted : AteMode::pooled_pairs;
    } else if (key == "threshold") {
        config.threshold = detail::parse_double_setting(key, value);
    } else if (key == "bins") {
        config.bins = static_cast<std::size_t>(detail::parse_unsigned_setting(key, value));
    } else if (key == "out") {
        config.output_directory = value;
    } else if (key == "emit") {
        config.emit.clear();
        for (auto& item : detail::split_list(value)) {
            if (item == "all") {
                config.emit = known_outputs();
            } else if (!known_outputs().count(item)) {
                throw Error(ErrorCode::InvalidConfig, "unknown output '" + item + "'");
            } else {
                config.emit.insert(item);
            }
        }
    } else if (key == "threads") {
        config.threads = static_cast<unsigned>(detail::parse_unsigned_setting(key, value));
    } else {
        throw Error(ErrorCode::InvalidConfig, "unknown setting '" + key + "'");
    }
}

/**
 * Reads flat `key = value` lines. `#` starts a comment, values may be
 * quoted, and lists may be written as `["a", "b"]` or `a, b`.
 */
inline void apply_config_text(RunConfig& config, std::string_view text, const std::string& source = "<config>") {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const auto trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed.front() == '[') {
            continue;  // blank line or section header
        }
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::InvalidConfig, source + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = detail::trim(std::string_view(trimmed).substr(0, eq));
        auto value = detail::trim(std::string_view(trimmed).substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
            value = value.substr(1, value.size() - 2);
        }
        try {
            apply_setting(config, key, value);
        } catch (const Error& e) {
            throw Error(ErrorCode::InvalidConfig, source + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

inline void apply_config_file(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open config " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    apply_config_text(config, buf.str(), path);
}

struct Finding {
    std::string code;
    std::string message;
};

namespace detail {

inline Schema resolve_schema(const RunConfig& config) {
    Schema schema = config.schema_path.empty() ? glioma_schema() : load_schema(config.schema_path);
    if (!config.treatment_column.empty() || !config.outcome_column.empty()) {
        const auto t = config.treatment_column.empty() ? schema[schema.treatment_index()].name : config.treatment_column;
        const auto o = config.outcome_column.empty() ? schema[schema.outcome_index()].name : config.outcome_column;
        schema = schema.with_roles(t, o);
    }
    return schema;
}

inline std::string finding_code(ErrorCode code) {
    return code == ErrorCode::EmptyGroup ? "SingleArm" : std::string(to_string(code));
}

}

/// Dry-run checks of paths, schema/CSV consistency and group sizes.
inline std::vector<Finding> validate(const RunConfig& config) {
    std::vector<Finding> findings;
    if (!(config.caliper_multiplier >= 0)) {
        findings.push_back({"InvalidConfig", "caliper multiplier must be non-negative"});
    }
    if (config.match_order == MatchOrder::random && !config.seed) {
        findings.push_back({"MissingSeed", "a seed is required when the match order is random"});
    }
    if (config.replicates < 100) {
        findings.push_back({"InvalidConfig", "at least 100 bootstrap replicates required"});
    }
    if (config.bins < 2) {
        findings.push_back({"InvalidConfig", "histograms need at least two bins"});
    }
    if (!(config.threshold > 0)) {
        findings.push_back({"InvalidConfig", "balance threshold must be positive"});
    }
    if (config.input_path.empty()) {
        findings.push_back({"MissingInput", "no input CSV given"});
        return findings;
    }
    if (!std::filesystem::is_regular_file(config.input_path)) {
        findings.push_back({"MissingInput", "cannot read " + config.input_path});
        return findings;
    }
    const auto out_dir = std::filesystem::path(config.resolved_output_directory());
    if (std::filesystem::exists(out_dir) && !std::filesystem::is_directory(out_dir)) {
        findings.push_back({"OutputNotDirectory", out_dir.string() + " exists and is not a directory"});
    }

    std::optional<Schema> schema;
    try {
        schema = detail::resolve_schema(config);
    } catch (const Error& e) {
        findings.push_back({detail::finding_code(e.code()), e.what()});
        return findings;
    }
    try {
        load_cohort(config.input_path, *schema);
    } catch (const Error& e) {
        findings.push_back({detail::finding_code(e.code()), e.what()});
    }
    return findings;
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

inline nlohmann::ordered_json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json to_json(const DescriptiveSummary& d) {
    nlohmann::ordered_json out;
    out["stratified_by"] = d.stratifier;
    out["strata"] = d.strata;
    out["sizes"] = d.stratum_sizes;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& e : d.entries) {
        nlohmann::ordered_json row;
        row["variable"] = e.name;
        row["kind"] = to_string(e.kind);
        auto cells = nlohmann::ordered_json::array();
        for (const auto& c : e.cells) {
            nlohmann::ordered_json cell;
            if (e.kind == Kind::binary) {
                cell["count"] = c.count;
                cell["percent"] = c.percent;
            } else {
                cell["mean"] = c.mean;
                cell["sd"] = c.sd;
            }
            cells.push_back(std::move(cell));
        }
        row["cells"] = std::move(cells);
        rows.push_back(std::move(row));
    }
    out["rows"] = std::move(rows);
    return out;
}

inline nlohmann::ordered_json to_json(const std::vector<BalanceRow>& rows) {
    auto out = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json row;
        row["covariate"] = r.covariate;
        row["kind"] = to_string(r.kind);
        row["treated"] = r.treated.center;
        row["control"] = r.control.center;
        if (r.kind == Kind::continuous) {
            row["treated_sd"] = r.treated.sd;
            row["control_sd"] = r.control.sd;
        }
        row["smd"] = r.signed_smd;
        row["abs_smd"] = r.smd();
        out.push_back(std::move(row));
    }
    return out;
}

inline nlohmann::ordered_json to_json(const EffectEstimate& e) {
    nlohmann::ordered_json out;
    out["estimand"] = to_string(e.estimand);
    out["estimate"] = number_or_null(e.point);
    out["standard_error"] = number_or_null(e.standard_error);
    out["ci_low"] = number_or_null(e.ci_low);
    out["ci_high"] = number_or_null(e.ci_high);
    out["p_value"] = number_or_null(e.p_value);
    out["replicates"] = e.replicates;
    out["method"] = e.method;
    return out;
}

inline nlohmann::ordered_json match_json(const MatchedSample& s) {
    nlohmann::ordered_json out;
    out["direction"] = to_string(s.options.direction);
    out["seed"] = s.options.seed;
    out["pairs"] = s.pairs.size();
    out["unmatched_treated"] = s.unmatched_treated;
    out["unmatched_control"] = s.unmatched_control;
    return out;
}

inline nlohmann::ordered_json config_json(const RunConfig& c) {
    nlohmann::ordered_json out;
    out["input"] = c.input_path;
    out["schema"] = c.schema_path.empty() ? std::string("<bundled glioma schema>") : c.schema_path;
    out["treatment"] = c.treatment_column;
    out["outcome"] = c.outcome_column;
    out["caliper"] = c.caliper_multiplier;
    out["caliper_scale"] = to_string(c.caliper_scale);
    out["order"] = to_string(c.match_order);
    out["seed"] = c.seed ? nlohmann::ordered_json(*c.seed) : nlohmann::ordered_json(nullptr);
    out["replicates"] = c.replicates;
    out["bootstrap_unit"] = to_string(c.bootstrap_unit);
    out["ate_mode"] = to_string(c.ate_mode);
    out["threshold"] = c.threshold;
    out["bins"] = c.bins;
    out["emit"] = std::vector<std::string>(c.emit.begin(), c.emit.end());
    return out;
}

inline std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

/// Writes via a temporary file and a rename so readers never see partial output.
inline void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        }
        body(out);
        out.flush();
        if (!out) {
            throw Error(ErrorCode::Io, "write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::Io, "cannot move output into place: " + path.string());
    }
}

}

/// Hash of the report with `provenance` removed; timestamps never enter it.
inline std::string determinism_hash(const nlohmann::ordered_json& report) {
    auto copy = report;
    copy.erase("provenance");
    return detail::hex64(detail::fnv1a(copy.dump()));
}

struct RunOutcome {
    int exit_code = 0;
    nlohmann::ordered_json report;
    std::vector<Finding> findings;
    std::vector<std::string> written;
    std::string error;
};

/// Exit codes: 0 success, 2 invalid input or configuration, 3 estimation failure.
inline int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingColumn:
        case ErrorCode::UnknownColumn:
        case ErrorCode::BadValue:
        case ErrorCode::EmptyCohort:
        case ErrorCode::InvalidSchema:
        case ErrorCode::InvalidConfig:
        case ErrorCode::EmptyGroup:
        case ErrorCode::Io:
            return 2;
        default:
            return 3;
    }
}

/**
 * Builds the report document for a loaded cohort. Pure apart from the
 * provenance timestamps, which the determinism hash excludes.
 */
inline nlohmann::ordered_json build_report(const RunConfig& config, const Cohort& cohort, const PipelineResult& result,
                                           const std::optional<BalanceReport>& balance, const ScoreHistograms& hist) {
    nlohmann::ordered_json report;
    report["tool"] = {{"name", "psm"}, {"version", version}};
    report["config"] = detail::config_json(config);

    const auto& schema = cohort.schema();
    report["cohort"] = {
        {"records", cohort.size()},
        {"treatment", schema[schema.treatment_index()].name},
        {"outcome", schema[schema.outcome_index()].name},
        {"treated", result.scores.treated.size()},
        {"control", result.scores.control.size()},
    };
    report["descriptive"] = detail::to_json(describe(cohort, schema[schema.outcome_index()].name));

    nlohmann::ordered_json prop;
    auto coefs = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < result.propensity.coefficients.size(); ++j) {
        coefs.push_back({
            {"term", result.propensity.names[static_cast<std::size_t>(j)]},
            {"estimate", result.propensity.coefficients[j]},
            {"standard_error", detail::number_or_null(result.propensity.standard_errors[j])},
        });
    }
    prop["coefficients"] = std::move(coefs);
    prop["iterations"] = result.propensity.iterations;
    prop["converged"] = result.propensity.converged;
    prop["separation_warning"] = result.propensity.separation;
    prop["log_likelihood"] = result.propensity.log_likelihood;
    prop["gradient_max_norm"] = result.propensity.gradient_max_norm;
    prop["score_sd"] = result.scores.sd;
    report["propensity"] = std::move(prop);

    nlohmann::ordered_json m;
    m["caliper"] = {
        {"multiplier", result.caliper.multiplier},
        {"scale", to_string(result.caliper.scale)},
        {"width", result.caliper.width},
    };
    m["order"] = to_string(config.match_order);
    m["treated_to_control"] = detail::match_json(result.forward);
    m["control_to_treated"] = detail::match_json(result.reverse);
    report["matching"] = std::move(m);

    nlohmann::ordered_json bal;
    bal["threshold"] = config.threshold;
    if (balance) {
        bal["balanced"] = balance->balanced;
        bal["max_after_smd"] = balance->max_after_smd;
        bal["before"] = detail::to_json(balance->before);
        bal["after"] = detail::to_json(balance->after);
    } else {
        bal["balanced"] = nullptr;
        bal["max_after_smd"] = nullptr;
        bal["before"] = detail::to_json(balance_rows(cohort));
        bal["after"] = nullptr;
    }
    report["balance"] = std::move(bal);

    report["histograms"] = {
        {"bins", hist.bins},
        {"total_variation_before", hist.total_variation(0)},
        {"total_variation_after", hist.total_variation(1)},
    };

    nlohmann::ordered_json eff;
    eff["status"] = result.effects_status;
    auto estimates = nlohmann::ordered_json::array();
    for (const auto* e : {&result.odds_ratio, &result.ate, &result.att, &result.atc}) {
        if (*e) {
            estimates.push_back(detail::to_json(**e));
        }
    }
    eff["estimates"] = std::move(estimates);
    eff["bootstrap"] = {
        {"unit", to_string(config.bootstrap_unit)},
        {"replicates", config.replicates},
        {"failed_replicates", result.failed_replicates},
        {"ate_mode", to_string(config.ate_mode)},
        {"note", "standard errors and intervals for ATE/ATT/ATC are percentile-bootstrap reconstructions"},
    };
    report["effects"] = std::move(eff);
    return report;
}

/**
 * Runs ingest, propensity fit, both matching passes, balance and effects,
 * then writes the requested outputs into the output directory.
 */
inline RunOutcome run(const RunConfig& config) {
    RunOutcome outcome;
    const auto started = detail::utc_now();
    outcome.findings = validate(config);
    if (!outcome.findings.empty()) {
        outcome.exit_code = 2;
        outcome.error = outcome.findings.front().message;
        return outcome;
    }

    try {
        const auto schema = detail::resolve_schema(config);
        const auto cohort = load_cohort(config.input_path, schema);

        PipelineSettings settings;
        settings.caliper_multiplier = config.caliper_multiplier;
        settings.caliper_scale = config.caliper_scale;
        settings.order = config.match_order;
        settings.seed = config.seed.value_or(0);
        settings.ate_mode = config.ate_mode;

        BootstrapConfig boot;
        boot.replicates = config.replicates;
        boot.seed = mix_seed(settings.seed ^ 0xB0075ULL);
        boot.unit = config.bootstrap_unit;
        boot.threads = config.threads;

        const auto result = run_pipeline(cohort, settings, boot);
        std::optional<BalanceReport> balance;
        if (result.matched) {
            balance = balance_report(cohort, *result.matched, config.threshold);
        }
        const auto hist = ps_histograms(result.scores, result.forward, config.bins);

        outcome.report = build_report(config, cohort, result, balance, hist);
        const auto hash = determinism_hash(outcome.report);
        outcome.report["provenance"] = {
            {"seed", settings.seed},
            {"bootstrap_seed", boot.seed},
            {"version", version},
            {"determinism_hash", hash},
            {"timestamps", {{"started", started}, {"finished", detail::utc_now()}}},
        };

        const std::filesystem::path dir = config.resolved_output_directory();
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) {
            throw Error(ErrorCode::Io, "cannot create " + dir.string());
        }
        auto emit = [&](const std::string& key, const std::string& file, const std::function<void(std::ostream&)>& body) {
            if (config.emit.count(key)) {
                detail::write_atomically(dir / file, body);
                outcome.written.push_back((dir / file).string());
            }
        };
        emit("balance_csv", "balance.csv", [&](std::ostream& o) {
            if (balance) {
                write_balance_csv(o, *balance);
            } else {
                BalanceReport partial;
                partial.threshold = config.threshold;
                partial.before = balance_rows(cohort);
                write_balance_csv(o, partial);
            }
        });
        emit("pairs_csv", "pairs.csv", [&](std::ostream& o) { write_pairs_csv(o, result.forward, result.scores); });
        emit("histograms_csv", "histograms.csv", [&](std::ostream& o) { write_histograms_csv(o, hist); });
        if (balance) {
            emit("loveplot_csv", "loveplot.csv", [&](std::ostream& o) { write_loveplot_csv(o, *balance); });
            emit("loveplot_svg", "loveplot.svg", [&](std::ostream& o) { write_loveplot_svg(o, *balance); });
        }
        emit("report_json", "report.json", [&](std::ostream& o) { o << outcome.report.dump(2) << '\n'; });
    } catch (const Error& e) {
        outcome.exit_code = exit_code_for(e.code());
        outcome.error = e.what();
    }
    return outcome;
}

namespace detail {

inline std::string cell_text(const nlohmann::ordered_json& v, int digits) {
    return v.is_number() ? fixed(v.get<double>(), digits) : std::string("-");
}

}

/// Plain-text tables (descriptive, balance, effects) rendered from a report document.
inline std::string render_text(const nlohmann::ordered_json& report) {
    std::ostringstream out;
    const auto& d = report.at("descriptive");
    out << "Descriptive summary by " << d.at("stratified_by").get<std::string>() << "\n";
    out << std::left << std::setw(18) << "Variable";
    const auto strata = d.at("strata");
    const auto sizes = d.at("sizes");
    for (std::size_t i = 0; i < strata.size(); ++i) {
        out << std::setw(20) << (strata[i].get<std::string>() + " (N=" + std::to_string(sizes[i].get<std::size_t>()) + ")");
    }
    out << "\n";
    for (const auto& row : d.at("rows")) {
        const bool binary = row.at("kind") == "binary";
        out << std::setw(18) << (row.at("variable").get<std::string>() + (binary ? " = 1" : ""));
        for (const auto& cell : row.at("cells")) {
            std::string text = binary ? std::to_string(cell.at("count").get<std::size_t>()) + " (" + fixed(cell.at("percent").get<double>(), 2) + ")"
                                      : fixed(cell.at("mean").get<double>(), 2) + " (" + fixed(cell.at("sd").get<double>(), 2) + ")";
            out << std::setw(20) << text;
        }
        out << "\n";
    }

    const auto& m = report.at("matching");
    out << "\nMatching: " << m.at("treated_to_control").at("pairs").get<std::size_t>() << " pairs (caliper width "
        << detail::cell_text(m.at("caliper").at("width"), 5) << ", " << m.at("treated_to_control").at("unmatched_treated").get<std::size_t>()
        << " treated and " << m.at("treated_to_control").at("unmatched_control").get<std::size_t>() << " controls unmatched)\n";

    const auto& b = report.at("balance");
    out << "\nBalance (|SMD|, threshold " << detail::cell_text(b.at("threshold"), 2) << ")\n";
    out << std::setw(18) << "Covariate" << std::setw(12) << "Before" << std::setw(12) << "After" << "\n";
    for (std::size_t i = 0; i < b.at("before").size(); ++i) {
        const auto& before = b.at("before")[i];
        out << std::setw(18) << before.at("covariate").get<std::string>() << std::setw(12) << detail::cell_text(before.at("abs_smd"), 3);
        out << std::setw(12) << (b.at("after").is_array() ? detail::cell_text(b.at("after")[i].at("abs_smd"), 3) : std::string("-")) << "\n";
    }

    const auto& e = report.at("effects");
    out << "\nEffects (" << e.at("status").get<std::string>() << ")\n";
    out << std::setw(8) << "" << std::setw(12) << "Estimate" << std::setw(16) << "Standard Error" << std::setw(22) << "95% CI" << "p-value\n";
    for (const auto& est : e.at("estimates")) {
        out << std::setw(8) << est.at("estimand").get<std::string>() << std::setw(12) << detail::cell_text(est.at("estimate"), 3)
            << std::setw(16) << detail::cell_text(est.at("standard_error"), 3)
            << std::setw(22) << (detail::cell_text(est.at("ci_low"), 3) + "  " + detail::cell_text(est.at("ci_high"), 3))
            << detail::cell_text(est.at("p_value"), 4) << "\n";
    }
    return out.str();
}

}

#endif
