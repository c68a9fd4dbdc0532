#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace circumsense {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value violates a type invariant (bad geometry, bad calibration, misaligned inputs).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input lies outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A voltage falls outside the calibrated (threshold_low, threshold_up) band.
class OutOfRangeReading : public Error {
public:
    using Error::Error;
};

class FitFailure : public Error {
public:
    FitFailure(const std::string& what, int iterations, double residual_rms)
        : Error(what), iterations_(iterations), residual_rms_(residual_rms) {}

    int iterations() const noexcept { return iterations_; }
    double residual_rms() const noexcept { return residual_rms_; }

private:
    int iterations_;
    double residual_rms_;
};

/// Malformed text input. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace circumsense
