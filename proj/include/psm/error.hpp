#ifndef PSM_ERROR_HPP
#define PSM_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

/**
 * @file error.hpp
 * @brief Error type shared by every stage of the matching pipeline.
 */

namespace psm {

enum class ErrorCode {
    MissingColumn,
    UnknownColumn,
    BadValue,
    EmptyCohort,
    InvalidSchema,
    DimensionMismatch,
    Singular,
    NotConverged,
    DegenerateSE,
    EmptyGroup,
    IndexOutOfRange,
    ZeroVarianceUnequalMeans,
    SchemaMismatch,
    DegenerateTable,
    EmptySample,
    MismatchedInputs,
    InvalidConfig,
    Io
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::UnknownColumn: return "UnknownColumn";
        case ErrorCode::BadValue: return "BadValue";
        case ErrorCode::EmptyCohort: return "EmptyCohort";
        case ErrorCode::InvalidSchema: return "InvalidSchema";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::Singular: return "Singular";
        case ErrorCode::NotConverged: return "NotConverged";
        case ErrorCode::DegenerateSE: return "DegenerateSE";
        case ErrorCode::EmptyGroup: return "EmptyGroup";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::ZeroVarianceUnequalMeans: return "ZeroVarianceUnequalMeans";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::DegenerateTable: return "DegenerateTable";
        case ErrorCode::EmptySample: return "EmptySample";
        case ErrorCode::MismatchedInputs: return "MismatchedInputs";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/**
 * Exception carrying a machine-readable code alongside the message.
 * The CLI maps codes onto exit statuses, so callers should prefer
 * catching `psm::Error` over `std::runtime_error`.
 */
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message) :
        std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}

#endif
