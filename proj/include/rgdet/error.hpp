#pragma once

#include <stdexcept>
#include <string>

namespace rgdet {

/// Failure categories. Each maps onto one CLI exit code.
enum class ErrorKind {
    Usage,        // bad arguments or config keys
    Data,         // I/O, file format, shape and length mismatches
    Numerical,    // singular / degenerate math
    Gate,         // correctness gate or selftest failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Short machine-readable name, e.g. "SingularMatrix".
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

inline Error numerical_error(std::string code, const std::string& what) {
    return {ErrorKind::Numerical, std::move(code), what};
}
inline Error data_error(std::string code, const std::string& what) {
    return {ErrorKind::Data, std::move(code), what};
}
inline Error usage_error(std::string code, const std::string& what) {
    return {ErrorKind::Usage, std::move(code), what};
}

int exit_code(ErrorKind kind) noexcept;

} // namespace rgdet
