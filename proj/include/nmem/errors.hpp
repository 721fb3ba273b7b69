#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nmem {

enum class ErrorCode {
    MalformedInput,
    InvariantViolation,
    EmptyConversation,
    UnknownCategory,
    BackendUnavailable,
    Timeout,
    TemplateUnbound,
    EmptyInput,
    DimensionMismatch,
    NotFound,
    IoFailure,
    FormatVersionMismatch,
    DegenerateInput,
    EmptyStore,
    UnparseableVerdict,
    Usage,
};

std::string_view to_string(ErrorCode code);

// Every failure the engine reports carries one of the codes above so callers
// (and the CLI exit path) can branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class NotFoundError : public Error {
public:
    explicit NotFoundError(std::vector<std::string> missing, const std::string& what = "not found");

    const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
    std::vector<std::string> missing_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

} // namespace nmem
