#pragma once

#include <stdexcept>
#include <string>

namespace gapcheck {

/// Root of the library's exception hierarchy.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// gateway
struct ProviderError : Error { using Error::Error; };
struct AuthError : ProviderError { using ProviderError::ProviderError; };
struct ScriptMiss : ProviderError { using ProviderError::ProviderError; };
struct EmptyInput : Error { using Error::Error; };

// parsing / templates
struct ParseError : Error { using Error::Error; };
struct TemplateNotFound : Error { using Error::Error; };

// consensus math
struct DimensionMismatch : Error { using Error::Error; };
struct ZeroVector : Error { using Error::Error; };
struct EmptyMatrix : Error { using Error::Error; };
struct InsufficientRuns : Error { using Error::Error; };

// datasets
struct SchemaError : Error {
    SchemaError(const std::string& what, int line) : Error(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
    int line_number;
};
struct UnknownAdapter : Error { using Error::Error; };
struct NoSupportingFlags : Error { using Error::Error; };
struct DegenerateVariant : Error { using Error::Error; };

// eval
struct MissingGold : Error { using Error::Error; };
struct MismatchedSets : Error { using Error::Error; };
struct JudgeParseError : Error { using Error::Error; };

// general contracts / io / config
struct ContractViolation : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

} // namespace gapcheck
