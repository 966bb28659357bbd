#pragma once

#include <stdexcept>
#include <string>

namespace fluxlab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes; the message names both operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A configuration value is outside its admissible range.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation (e.g. sqrt of a negative).
class DomainError : public Error {
public:
    using Error::Error;
};

/// On-disk data does not match its manifest or is truncated.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Requested time step exceeds the maximum CFL number.
class CflError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step_index)
        : Error(what), step_(step_index) {}
    std::size_t step_index() const noexcept { return step_; }

private:
    std::size_t step_;
};

class RolloutError : public Error {
public:
    RolloutError(const std::string& what, std::size_t step_index)
        : Error(what), step_(step_index) {}
    std::size_t step_index() const noexcept { return step_; }

private:
    std::size_t step_;
};

} // namespace fluxlab
