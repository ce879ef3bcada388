#include "nullaudit/error.hpp"

namespace nullaudit {

Error::Error(ErrorCategory category, std::string code, const std::string& message)
    : std::runtime_error(code + ": " + message), category_(category), code_(std::move(code)) {}

bool Error::degenerate() const noexcept {
    return category_ == ErrorCategory::statistical &&
           (code_ == "ZeroVariance" || code_ == "DegenerateCovariate" ||
            code_ == "NonConvergence" || code_ == "TooFewEvents");
}

std::exception_ptr Error::with_context(std::string_view context) const {
    std::string message = what();
    // drop the "<code>: " prefix added by the constructor
    if (message.rfind(code_ + ": ", 0) == 0) message.erase(0, code_.size() + 2);
    message = std::string(context) + ": " + message;
    switch (category_) {
        case ErrorCategory::config: return std::make_exception_ptr(ConfigError(code_, message));
        case ErrorCategory::data: return std::make_exception_ptr(DataError(code_, message));
        case ErrorCategory::statistical: return std::make_exception_ptr(StatError(code_, message));
        case ErrorCategory::io: return std::make_exception_ptr(IoError(code_, message));
    }
    return std::make_exception_ptr(Error(category_, code_, message));
}

std::string_view to_string(ErrorCategory category) noexcept {
    switch (category) {
        case ErrorCategory::config: return "config";
        case ErrorCategory::data: return "data";
        case ErrorCategory::statistical: return "statistical";
        case ErrorCategory::io: return "io";
    }
    return "unknown";
}

}  // namespace nullaudit
