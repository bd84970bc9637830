#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tasr {

enum class ErrorKind {
    WeightSumViolation,
    RangeViolation,
    ParseError,
    EmptyBranch,
    InvalidEntity,
    IndexUnavailable,
    EncoderUnavailable,
    DimensionMismatch,
    EmptyIndex,
    LlmProtocolError,
    LlmUnavailable,
    MockMiss,
    InvalidDecomposition,
    EmptyPool,
    AmbiguousBinding,
    BindingConflict,
    EmptyAnswer,
    DatasetParseError,
    QueryAborted,
};

std::string_view to_string(ErrorKind kind);

// Base of every error the library raises. `kind()` lets callers and tests
// dispatch on the failure class without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

enum class RoleTag { Extract, Decompose, TypeSelect, Answer };

std::string_view to_string(RoleTag role);
RoleTag role_from_string(std::string_view s);

// LLM failures carry the role of the request that failed.
class LlmError : public Error {
public:
    LlmError(ErrorKind kind, RoleTag role, const std::string& message)
        : Error(kind, "[" + std::string(to_string(role)) + "] " + message), role_(role) {}

    RoleTag role() const noexcept { return role_; }

private:
    RoleTag role_;
};

}  // namespace tasr
