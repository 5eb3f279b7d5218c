#pragma once

#include <stdexcept>
#include <string>

namespace madwalk {

/// Invalid user-facing input: parameters outside their domain, malformed
/// configuration text, violated preconditions.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An internal consistency check failed (interval bookkeeping, lockstep,
/// hard coupling invariants). Indicates a bug or a falsified claim.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Not enough confirmed blocks / samples to form an estimate.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A finite computation exceeded its configured budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) [[unlikely]] throw ConfigError(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) [[unlikely]] throw ConfigError(what);
}

inline void ensure(bool ok, const char* what) {
  if (!ok) [[unlikely]] throw InvariantViolation(what);
}

inline void ensure(bool ok, const std::string& what) {
  if (!ok) [[unlikely]] throw InvariantViolation(what);
}

}  // namespace detail
}  // namespace madwalk
