#pragma once

#include <stdexcept>
#include <string>

namespace hts {

/// Broad failure classes; the CLI maps each one to a process exit code.
enum class ErrorCategory {
    Config = 2,
    Data = 3,
    Numerical = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string code, const std::string& message)
        : std::runtime_error(message), category_(category), code_(std::move(code)) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }
    /// Stable machine-readable identifier, e.g. "NonPositiveValue".
    [[nodiscard]] const std::string& code() const noexcept { return code_; }

private:
    ErrorCategory category_;
    std::string code_;
};

inline Error data_error(std::string code, const std::string& message) {
    return Error(ErrorCategory::Data, std::move(code), message);
}

inline Error config_error(std::string code, const std::string& message) {
    return Error(ErrorCategory::Config, std::move(code), message);
}

inline Error numerical_error(std::string code, const std::string& message) {
    return Error(ErrorCategory::Numerical, std::move(code), message);
}

}  // namespace hts
