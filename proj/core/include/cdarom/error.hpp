#pragma once

#include <stdexcept>
#include <string>

namespace cdarom {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument to a construction or query (bad h, unsupported degree, r > rank, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when one applies.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line = 0)
        : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Pipeline configuration rejected before any compute.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Linear solver failure, singular reduced system, non-finite state.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double residual = 0.0)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace cdarom
