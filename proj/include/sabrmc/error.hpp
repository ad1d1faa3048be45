#pragma once

#include <stdexcept>
#include <string>

namespace sabrmc {

/// Argument outside the mathematical domain of a function or sampler.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A truncated series failed to reach its error bound within the iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent or malformed run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A benchmark price needed for a bias computation is not available.
class FixtureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

}  // namespace detail
}  // namespace sabrmc
