#ifndef MPCG_ERROR_HPP
#define MPCG_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace mpcg {

enum class ErrorCode {
    IndexOutOfRange,
    AsymmetricInput,
    MissingDiagonal,
    DuplicateEntry,
    DimensionMismatch,
    OverflowToInfinity,
    ParseError,
    IoError,
    BreakdownDivisionByZero,
    NonpositiveDiagonal,
    Stage2NotConverged,
    InvalidArgument,
    EmptyIntersection,
    DegenerateInterval,
    InvalidSpec,
    GraphFull,
    EmptyTrainingSet,
    SampleTooSmall,
    MissingCostEntry,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::AsymmetricInput: return "AsymmetricInput";
    case ErrorCode::MissingDiagonal: return "MissingDiagonal";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OverflowToInfinity: return "OverflowToInfinity";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BreakdownDivisionByZero: return "BreakdownDivisionByZero";
    case ErrorCode::NonpositiveDiagonal: return "NonpositiveDiagonal";
    case ErrorCode::Stage2NotConverged: return "Stage2NotConverged";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::DegenerateInterval: return "DegenerateInterval";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::GraphFull: return "GraphFull";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::SampleTooSmall: return "SampleTooSmall";
    case ErrorCode::MissingCostEntry: return "MissingCostEntry";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Matrix Market parse failure; line is 1-based, 0 when not tied to a line.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace mpcg

#endif // MPCG_ERROR_HPP
