#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mobiscope {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DuplicateKeyError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. `line` is 1-based and counts the header row.
class SchemaError : public Error {
public:
    SchemaError(std::string file, std::size_t line, std::string reason)
        : Error(file + ":" + std::to_string(line) + ": " + reason),
          file_(std::move(file)), line_(line), reason_(std::move(reason)) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string file_;
    std::size_t line_;
    std::string reason_;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class SingularDesignError : public Error {
public:
    using Error::Error;
};

class EstimationError : public Error {
public:
    using Error::Error;
};

}  // namespace mobiscope
