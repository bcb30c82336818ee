#pragma once

#include <stdexcept>
#include <string>

namespace vicert {

// Bad user input: malformed config, inconsistent grid shapes, values outside
// documented ranges. Maps to exit code 2 in the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Arguments outside a function's mathematical domain (negative argument to a
// class-K function, inadmissible input passed to step, ...).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Target value not attained by the function on its domain, or a formula' s
// validity condition fails (epsilon at or beyond the certificate pole).
class RangeError : public std::range_error {
public:
    explicit RangeError(const std::string& what) : std::range_error(what) {}
};

// Numerical breakdown: non-finite intermediate, iteration cap hit, loss of
// bracket. Carries enough text to locate the offending node or sample.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// A certificate was requested that the given run cannot support (wrong
// criterion kind, missing sector constants, missing theta majorant).
// Maps to exit code 4 in the CLI when the certificate was required.
class CertificateUnavailable : public std::runtime_error {
public:
    explicit CertificateUnavailable(const std::string& what) : std::runtime_error(what) {}
};

} // namespace vicert
