#pragma once

#include <exception>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nullaudit {

/// Broad failure domains. The CLI maps each onto a stable exit status.
enum class ErrorCategory {
    config,       // malformed or schema-violating configuration
    data,         // input data does not satisfy a module's preconditions
    statistical,  // a statistic is undefined or a fit failed
    io,           // filesystem or network failure
};

/// Base exception. `code()` names the typed failure (e.g. "MissingGene") so
/// callers and tests can branch on it without parsing the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string code, const std::string& message);

    ErrorCategory category() const noexcept { return category_; }
    const std::string& code() const noexcept { return code_; }

    /// True for statistical failures caused by a degenerate input (constant
    /// covariate, separation) rather than by a programming or data error.
    bool degenerate() const noexcept;

    /// Same type, category and code, message prefixed with `context`.
    std::exception_ptr with_context(std::string_view context) const;

private:
    ErrorCategory category_;
    std::string code_;
};

struct ConfigError : Error {
    ConfigError(std::string code, const std::string& message)
        : Error(ErrorCategory::config, std::move(code), message) {}
};

struct DataError : Error {
    DataError(std::string code, const std::string& message)
        : Error(ErrorCategory::data, std::move(code), message) {}
};

struct StatError : Error {
    StatError(std::string code, const std::string& message)
        : Error(ErrorCategory::statistical, std::move(code), message) {}
};

struct IoError : Error {
    IoError(std::string code, const std::string& message)
        : Error(ErrorCategory::io, std::move(code), message) {}
};

std::string_view to_string(ErrorCategory category) noexcept;

}  // namespace nullaudit
