#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace unidm {

enum class ErrorCode {
    MalformedCsv,
    DuplicateAttribute,
    EmptyHeader,
    DuplicateTable,
    UnknownTable,
    UnknownAttribute,
    RowOutOfRange,
    NoMaskableCells,
    InvalidTask,
    MissingCellInQuery,
    BackendUnavailable,
    AuthFailure,
    NoMatchingRule,
    MalformedBackendReply,
    CacheCorrupt,
    EmptyCandidateSet,
    EmptyContext,
    NoBlankInCloze,
    EmptyAnswer,
    AmbiguousBinaryAnswer,
    EmptyBenchmark,
    LengthMismatch,
    ConfigInvalid,
    BenchmarkUnreadable,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::DuplicateAttribute: return "DuplicateAttribute";
    case ErrorCode::EmptyHeader: return "EmptyHeader";
    case ErrorCode::DuplicateTable: return "DuplicateTable";
    case ErrorCode::UnknownTable: return "UnknownTable";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::RowOutOfRange: return "RowOutOfRange";
    case ErrorCode::NoMaskableCells: return "NoMaskableCells";
    case ErrorCode::InvalidTask: return "InvalidTask";
    case ErrorCode::MissingCellInQuery: return "MissingCellInQuery";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::NoMatchingRule: return "NoMatchingRule";
    case ErrorCode::MalformedBackendReply: return "MalformedBackendReply";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
    case ErrorCode::EmptyCandidateSet: return "EmptyCandidateSet";
    case ErrorCode::EmptyContext: return "EmptyContext";
    case ErrorCode::NoBlankInCloze: return "NoBlankInCloze";
    case ErrorCode::EmptyAnswer: return "EmptyAnswer";
    case ErrorCode::AmbiguousBinaryAnswer: return "AmbiguousBinaryAnswer";
    case ErrorCode::EmptyBenchmark: return "EmptyBenchmark";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::BenchmarkUnreadable: return "BenchmarkUnreadable";
    }
    return "Unknown";
}

/// Every failure raised by the engine. The code is the stable, machine-readable
/// part; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace unidm
