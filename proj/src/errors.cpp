#include "nmem/errors.hpp"

namespace nmem {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedInput:        return "MalformedInput";
        case ErrorCode::InvariantViolation:    return "InvariantViolation";
        case ErrorCode::EmptyConversation:     return "EmptyConversation";
        case ErrorCode::UnknownCategory:       return "UnknownCategory";
        case ErrorCode::BackendUnavailable:    return "BackendUnavailable";
        case ErrorCode::Timeout:               return "Timeout";
        case ErrorCode::TemplateUnbound:       return "TemplateUnbound";
        case ErrorCode::EmptyInput:            return "EmptyInput";
        case ErrorCode::DimensionMismatch:     return "DimensionMismatch";
        case ErrorCode::NotFound:              return "NotFound";
        case ErrorCode::IoFailure:             return "IoFailure";
        case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
        case ErrorCode::DegenerateInput:       return "DegenerateInput";
        case ErrorCode::EmptyStore:            return "EmptyStore";
        case ErrorCode::UnparseableVerdict:    return "UnparseableVerdict";
        case ErrorCode::Usage:                 return "Usage";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

namespace {

std::string describe_missing(const std::vector<std::string>& missing, const std::string& what) {
    std::string out = what + " [";
    for (std::size_t i = 0; i < missing.size(); ++i) {
        if (i) out += ", ";
        out += missing[i];
    }
    return out + "]";
}

} // namespace

NotFoundError::NotFoundError(std::vector<std::string> missing, const std::string& what)
    : Error(ErrorCode::NotFound, describe_missing(missing, what)), missing_(std::move(missing)) {}

void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace nmem
