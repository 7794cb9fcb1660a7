#pragma once

#include <stdexcept>
#include <string>

namespace mtlpose {

// Base class for every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mathematically invalid input (zero-norm quaternion, zero eye vector, ...).
struct DomainError : Error {
    using Error::Error;
};

// Invalid configuration or mismatched shapes between components.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed text input; carries the 1-based line number.
struct ParseError : Error {
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Binary file with wrong magic, version or truncated payload.
struct FormatError : Error {
    using Error::Error;
};

// Numerical failure during optimization (NaN/Inf).
struct TrainingError : Error {
    using Error::Error;
};

}  // namespace mtlpose
