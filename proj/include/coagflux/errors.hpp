#pragma once

#include <stdexcept>
#include <string>

namespace coagflux {

/// Invalid configuration (bad parameter combination, malformed config file).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::runtime_error {
public:
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Runtime numerical failure (non-convergence, step-size collapse, ...).
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace coagflux
