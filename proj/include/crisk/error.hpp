#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crisk {

enum class ErrorCode {
    MissingFile,
    MissingColumn,
    GapInDates,
    DuplicateDate,
    UnorderedDates,
    UnparseableValue,
    EmptyIntersection,
    NonPositiveValue,
    InvalidConfig,
    InsufficientHistory,
    IndexOutOfRange,
    ZeroTrailingMean,
    InsufficientRows,
    LengthMismatch,
    DegenerateInput,
    ZeroPerfectSlope,
    DegenerateStrategy,
    EmptyEnsemble,
    ConstantRegressor,
    TooFewRows,
    DimensionMismatch,
    ConstantOutput,
    DivergedTraining,
    AllDiverged,
    NoCandidates,
    DateMismatch,
    IncompleteManifest,
    StaleModel,
    ParseError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Row-scoped ingest failure; `row` is the 1-based data row (header excluded).
class RowError : public Error {
public:
    RowError(ErrorCode code, std::size_t row, const std::string& what)
        : Error(code, "row " + std::to_string(row) + ": " + what), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::GapInDates: return "GapInDates";
        case ErrorCode::DuplicateDate: return "DuplicateDate";
        case ErrorCode::UnorderedDates: return "UnorderedDates";
        case ErrorCode::UnparseableValue: return "UnparseableValue";
        case ErrorCode::EmptyIntersection: return "EmptyIntersection";
        case ErrorCode::NonPositiveValue: return "NonPositiveValue";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InsufficientHistory: return "InsufficientHistory";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::ZeroTrailingMean: return "ZeroTrailingMean";
        case ErrorCode::InsufficientRows: return "InsufficientRows";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::ZeroPerfectSlope: return "ZeroPerfectSlope";
        case ErrorCode::DegenerateStrategy: return "DegenerateStrategy";
        case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
        case ErrorCode::ConstantRegressor: return "ConstantRegressor";
        case ErrorCode::TooFewRows: return "TooFewRows";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ConstantOutput: return "ConstantOutput";
        case ErrorCode::DivergedTraining: return "DivergedTraining";
        case ErrorCode::AllDiverged: return "AllDiverged";
        case ErrorCode::NoCandidates: return "NoCandidates";
        case ErrorCode::DateMismatch: return "DateMismatch";
        case ErrorCode::IncompleteManifest: return "IncompleteManifest";
        case ErrorCode::StaleModel: return "StaleModel";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

}  // namespace crisk
