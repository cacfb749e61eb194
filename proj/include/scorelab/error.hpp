#pragma once

#include <stdexcept>
#include <string>

namespace scorelab {

/// Raised when an argument lies outside the mathematical domain of an operation
/// (odd dimension, gamma >= R/2, too few samples, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Raised by the experiment runner for malformed configurations.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw DomainError(message);
}

}  // namespace scorelab
