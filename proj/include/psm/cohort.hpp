#ifndef PSM_COHORT_HPP
#define PSM_COHORT_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "stats.hpp"

/**
 * @file cohort.hpp
 * @brief Cohort data model, CSV ingestion and descriptive statistics.
 *
 * A `Cohort` is an immutable table of numeric records validated against a
 * `Schema`. Exactly one binary column is the treatment and exactly one
 * binary column is the outcome; every other column is a covariate.
 */

namespace psm {

enum class Kind { binary, continuous };
enum class Role { covariate, treatment, outcome };

inline std::string_view to_string(Kind k) { return k == Kind::binary ? "binary" : "continuous"; }

inline std::string_view to_string(Role r) {
    switch (r) {
        case Role::covariate: return "covariate";
        case Role::treatment: return "treatment";
        case Role::outcome: return "outcome";
    }
    return "covariate";
}

struct CovariateSpec {
    std::string name;
    Kind kind = Kind::binary;
    Role role = Role::covariate;

    /// Inclusive lower bound for continuous values, e.g. adult age.
    std::optional<double> minimum;

    /// Header name in the CSV, when it differs from `name`.
    std::string source;

    /// Binary column stored as 1 - file value.
    bool invert = false;

    const std::string& header() const { return source.empty() ? name : source; }

    bool operator==(const CovariateSpec&) const = default;
};

class Schema {
public:
    Schema() = default;

    explicit Schema(std::vector<CovariateSpec> columns) : columns_(std::move(columns)) {
        validate();
    }

    const std::vector<CovariateSpec>& columns() const { return columns_; }
    std::size_t size() const { return columns_.size(); }
    const CovariateSpec& operator[](std::size_t i) const { return columns_[i]; }

    std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            if (columns_[i].name == name) {
                return i;
            }
        }
        return std::nullopt;
    }

    std::size_t index_of(std::string_view name) const {
        auto found = find(name);
        if (!found) {
            throw Error(ErrorCode::UnknownColumn, std::string(name));
        }
        return *found;
    }

    std::size_t treatment_index() const { return role_index(Role::treatment); }
    std::size_t outcome_index() const { return role_index(Role::outcome); }

    /// Covariate columns in schema order; these are the propensity predictors.
    std::vector<std::size_t> covariate_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            if (columns_[i].role == Role::covariate) {
                out.push_back(i);
            }
        }
        return out;
    }

    /**
     * Copy with the treatment and outcome roles moved to the named columns.
     * Columns that previously held those roles become covariates.
     */
    Schema with_roles(std::string_view treatment, std::string_view outcome) const {
        auto cols = columns_;
        const auto t = index_of(treatment);
        const auto o = index_of(outcome);
        for (auto& c : cols) {
            if (c.role != Role::covariate) {
                c.role = Role::covariate;
            }
        }
        cols[t].role = Role::treatment;
        cols[o].role = Role::outcome;
        return Schema(std::move(cols));
    }

    bool operator==(const Schema&) const = default;

    static Schema from_json(const nlohmann::json& doc) {
        const auto& list = doc.is_array() ? doc : doc.at("columns");
        std::vector<CovariateSpec> cols;
        try {
            for (const auto& entry : list) {
                CovariateSpec spec;
                spec.name = entry.at("name").get<std::string>();
                const auto kind = entry.value("kind", std::string("binary"));
                if (kind == "binary") {
                    spec.kind = Kind::binary;
                } else if (kind == "continuous") {
                    spec.kind = Kind::continuous;
                } else {
                    throw Error(ErrorCode::InvalidSchema, "column " + spec.name + ": unknown kind '" + kind + "'");
                }
                const auto role = entry.value("role", std::string("covariate"));
                if (role == "covariate") {
                    spec.role = Role::covariate;
                } else if (role == "treatment") {
                    spec.role = Role::treatment;
                } else if (role == "outcome") {
                    spec.role = Role::outcome;
                } else {
                    throw Error(ErrorCode::InvalidSchema, "column " + spec.name + ": unknown role '" + role + "'");
                }
                if (entry.contains("min")) {
                    spec.minimum = entry.at("min").get<double>();
                }
                spec.source = entry.value("column", std::string());
                spec.invert = entry.value("invert", false);
                cols.push_back(std::move(spec));
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::InvalidSchema, e.what());
        }
        return Schema(std::move(cols));
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json list = nlohmann::ordered_json::array();
        for (const auto& c : columns_) {
            nlohmann::ordered_json entry;
            entry["name"] = c.name;
            entry["kind"] = to_string(c.kind);
            entry["role"] = to_string(c.role);
            if (c.minimum) {
                entry["min"] = *c.minimum;
            }
            if (!c.source.empty()) {
                entry["column"] = c.source;
            }
            if (c.invert) {
                entry["invert"] = true;
            }
            list.push_back(std::move(entry));
        }
        nlohmann::ordered_json doc;
        doc["columns"] = std::move(list);
        return doc;
    }

private:
    std::size_t role_index(Role role) const {
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            if (columns_[i].role == role) {
                return i;
            }
        }
        throw Error(ErrorCode::InvalidSchema, std::string("no ") + std::string(to_string(role)) + " column");
    }

    void validate() const {
        std::unordered_set<std::string> seen;
        int treatments = 0;
        int outcomes = 0;
        for (const auto& c : columns_) {
            if (c.name.empty()) {
                throw Error(ErrorCode::InvalidSchema, "empty column name");
            }
            if (!seen.insert(c.name).second) {
                throw Error(ErrorCode::InvalidSchema, "duplicate column " + c.name);
            }
            if (c.role != Role::covariate && c.kind != Kind::binary) {
                throw Error(ErrorCode::InvalidSchema, c.name + " must be binary to serve as " + std::string(to_string(c.role)));
            }
            if (c.invert && c.kind != Kind::binary) {
                throw Error(ErrorCode::InvalidSchema, c.name + ": only binary columns can be inverted");
            }
            treatments += c.role == Role::treatment;
            outcomes += c.role == Role::outcome;
        }
        if (treatments != 1 || outcomes != 1) {
            throw Error(ErrorCode::InvalidSchema, "schema needs exactly one treatment and one outcome column");
        }
    }

    std::vector<CovariateSpec> columns_;
};

inline Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open schema " + path);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidSchema, path + ": " + e.what());
    }
    return Schema::from_json(doc);
}

struct PatientRecord {
    std::vector<double> values;
    bool operator==(const PatientRecord&) const = default;
};

class Cohort {
public:
    using Pair = std::pair<std::size_t, std::size_t>;

    Cohort(Schema schema, std::vector<PatientRecord> records, std::vector<Pair> pairs = {}) :
        schema_(std::move(schema)), records_(std::move(records)), pairs_(std::move(pairs))
    {
        if (records_.empty()) {
            throw Error(ErrorCode::EmptyCohort, "cohort has no records");
        }
        for (std::size_t r = 0; r < records_.size(); ++r) {
            if (records_[r].values.size() != schema_.size()) {
                throw Error(ErrorCode::DimensionMismatch, "record " + std::to_string(r) + " length differs from schema");
            }
            for (std::size_t c = 0; c < schema_.size(); ++c) {
                check_value(schema_[c], records_[r].values[c], r);
            }
        }
        if (records_.size() < 2) {
            throw Error(ErrorCode::EmptyCohort, "cohort needs at least two records");
        }
        const auto t = schema_.treatment_index();
        std::size_t treated = 0;
        for (const auto& rec : records_) {
            treated += rec.values[t] == 1.0;
        }
        if (treated == 0 || treated == records_.size()) {
            throw Error(ErrorCode::EmptyGroup, "only one treatment level present in " + schema_[t].name);
        }
        for (const auto& [a, b] : pairs_) {
            if (a >= records_.size() || b >= records_.size()) {
                throw Error(ErrorCode::IndexOutOfRange, "pair refers to a missing record");
            }
        }
    }

    const Schema& schema() const { return schema_; }
    const std::vector<PatientRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    double value(std::size_t row, std::size_t col) const { return records_[row].values[col]; }

    /// Row indices of (treated, control) pairs when this cohort came out of matching.
    const std::vector<Pair>& pairs() const { return pairs_; }

    std::vector<double> column(std::size_t col) const {
        std::vector<double> out;
        out.reserve(records_.size());
        for (const auto& rec : records_) {
            out.push_back(rec.values[col]);
        }
        return out;
    }

    std::vector<double> column(std::string_view name) const { return column(schema_.index_of(name)); }

    std::vector<double> treatment() const { return column(schema_.treatment_index()); }
    std::vector<double> outcomes() const { return column(schema_.outcome_index()); }

    bool operator==(const Cohort&) const = default;

    static void check_value(const CovariateSpec& spec, double v, std::size_t row) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::BadValue, "row " + std::to_string(row) + ", column " + spec.name + ": non-finite value");
        }
        if (spec.kind == Kind::binary && v != 0.0 && v != 1.0) {
            throw Error(ErrorCode::BadValue, "row " + std::to_string(row) + ", column " + spec.name + ": binary value must be 0 or 1");
        }
        if (spec.minimum && v < *spec.minimum) {
            throw Error(ErrorCode::BadValue, "row " + std::to_string(row) + ", column " + spec.name + ": below minimum");
        }
    }

private:
    Schema schema_;
    std::vector<PatientRecord> records_;
    std::vector<Pair> pairs_;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

/// Splits one CSV line; double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(trim(current));
            current.clear();
        } else {
            current += ch;
        }
    }
    fields.push_back(trim(current));
    return fields;
}

inline std::optional<double> parse_number(std::string_view text) {
    if (text.empty()) {
        return std::nullopt;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    double v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        return std::nullopt;
    }
    return v;
}

/// Shortest representation that parses back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}

/**
 * Reads a cohort from CSV. Columns absent from the schema are ignored;
 * schema columns are matched by header name. `source_name` prefixes
 * error messages so failures point at file and line.
 */
inline Cohort load_cohort(std::istream& in, const Schema& schema, const std::string& source_name = "<csv>") {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
            line.erase(0, 3);
        }
        if (!detail::trim(line).empty()) {
            header = detail::split_csv_line(line);
            break;
        }
    }
    if (header.empty()) {
        throw Error(ErrorCode::EmptyCohort, source_name + ": no header row");
    }

    std::vector<std::size_t> position(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c) {
        const auto it = std::find(header.begin(), header.end(), schema[c].header());
        if (it == header.end()) {
            throw Error(ErrorCode::MissingColumn, source_name + ": " + schema[c].header());
        }
        position[c] = static_cast<std::size_t>(it - header.begin());
    }

    std::vector<PatientRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto fields = detail::split_csv_line(line);
        const auto where = source_name + ":" + std::to_string(line_no);
        if (fields.size() != header.size()) {
            throw Error(ErrorCode::BadValue, where + ": expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        PatientRecord rec;
        rec.values.reserve(schema.size());
        for (std::size_t c = 0; c < schema.size(); ++c) {
            const auto& spec = schema[c];
            const auto& cell = fields[position[c]];
            if (cell.empty() || cell == "NA" || cell == "NaN") {
                throw Error(ErrorCode::BadValue, where + ", column " + spec.name + ": missing value");
            }
            auto parsed = detail::parse_number(cell);
            if (!parsed) {
                throw Error(ErrorCode::BadValue, where + ", column " + spec.name + ": cannot parse '" + cell + "'");
            }
            double v = *parsed;
            if (spec.kind == Kind::binary && v != 0.0 && v != 1.0) {
                throw Error(ErrorCode::BadValue, where + ", column " + spec.name + ": binary value must be 0 or 1, found '" + cell + "'");
            }
            if (spec.minimum && v < *spec.minimum) {
                throw Error(ErrorCode::BadValue, where + ", column " + spec.name + ": " + cell + " is below the minimum " + detail::format_number(*spec.minimum));
            }
            if (spec.invert) {
                v = 1.0 - v;
            }
            rec.values.push_back(v);
        }
        records.push_back(std::move(rec));
    }
    if (records.empty()) {
        throw Error(ErrorCode::EmptyCohort, source_name + ": no data rows");
    }
    return Cohort(schema, std::move(records));
}

inline Cohort load_cohort(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path);
    }
    return load_cohort(in, schema, path);
}

/// Writes the cohort in the layout `load_cohort` reads under the same schema.
inline void write_csv(std::ostream& out, const Cohort& cohort) {
    const auto& schema = cohort.schema();
    for (std::size_t c = 0; c < schema.size(); ++c) {
        out << (c ? "," : "") << schema[c].header();
    }
    out << '\n';
    for (const auto& rec : cohort.records()) {
        for (std::size_t c = 0; c < schema.size(); ++c) {
            const double v = schema[c].invert ? 1.0 - rec.values[c] : rec.values[c];
            out << (c ? "," : "") << detail::format_number(v);
        }
        out << '\n';
    }
}

struct SummaryCell {
    std::size_t n = 0;
    std::size_t count = 0;   // binary: number of 1s
    double percent = 0;      // binary
    double mean = 0;         // continuous
    double sd = 0;           // continuous, n-1 denominator
};

struct SummaryEntry {
    std::string name;
    Kind kind = Kind::binary;
    std::vector<SummaryCell> cells;  // aligned with DescriptiveSummary::strata
};

struct DescriptiveSummary {
    std::string stratifier;
    std::vector<std::string> strata;  // "overall", "<col>=0", "<col>=1"
    std::vector<std::size_t> stratum_sizes;
    std::vector<SummaryEntry> entries;

    const SummaryEntry& entry(std::string_view name) const {
        for (const auto& e : entries) {
            if (e.name == name) {
                return e;
            }
        }
        throw Error(ErrorCode::UnknownColumn, std::string(name));
    }
};

/**
 * Counts and percentages of 1s for binary columns, mean and SD for
 * continuous ones, overall and within each level of a binary stratifier.
 * Entries follow schema order and skip the stratifier itself.
 */
inline DescriptiveSummary describe(const Cohort& cohort, std::string_view stratify_by) {
    const auto& schema = cohort.schema();
    const auto s = schema.find(stratify_by);
    if (!s) {
        throw Error(ErrorCode::UnknownColumn, std::string(stratify_by));
    }
    if (schema[*s].kind != Kind::binary) {
        throw Error(ErrorCode::UnknownColumn, std::string(stratify_by) + " is not binary");
    }

    DescriptiveSummary out;
    out.stratifier = std::string(stratify_by);
    out.strata = {"overall", out.stratifier + "=0", out.stratifier + "=1"};

    std::vector<std::vector<std::size_t>> members(3);
    for (std::size_t r = 0; r < cohort.size(); ++r) {
        members[0].push_back(r);
        members[cohort.value(r, *s) == 1.0 ? 2 : 1].push_back(r);
    }
    for (const auto& m : members) {
        out.stratum_sizes.push_back(m.size());
    }

    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (c == *s) {
            continue;
        }
        SummaryEntry entry{schema[c].name, schema[c].kind, {}};
        for (const auto& m : members) {
            SummaryCell cell;
            cell.n = m.size();
            std::vector<double> vals;
            vals.reserve(m.size());
            for (auto r : m) {
                vals.push_back(cohort.value(r, c));
            }
            if (schema[c].kind == Kind::binary) {
                cell.count = static_cast<std::size_t>(std::count(vals.begin(), vals.end(), 1.0));
                cell.percent = m.empty() ? 0.0 : 100.0 * static_cast<double>(cell.count) / static_cast<double>(m.size());
            } else if (!m.empty()) {
                cell.mean = stats::mean(vals);
                cell.sd = stats::sd(vals);
            }
            entry.cells.push_back(cell);
        }
        out.entries.push_back(std::move(entry));
    }
    return out;
}

}

#endif
