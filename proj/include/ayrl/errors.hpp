#pragma once

#include <stdexcept>
#include <string>

namespace ayrl {

/// Bad shapes, out-of-range indices, stale caches: caller bugs.
class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

/// Invalid configuration (unknown keys, bad agent kind, width mismatch).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values where finite math was required (gradients, ODE state).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ayrl
