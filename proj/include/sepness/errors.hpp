#pragma once

#include <stdexcept>
#include <string>

namespace sepness {

// Invalid user-supplied parameter (bad rate, density, site index, ...).
struct parameter_error : std::invalid_argument {
  explicit parameter_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Request exceeds an enforced size cap (state space too large to enumerate).
struct capacity_error : std::runtime_error {
  explicit capacity_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical routine failed to reach its required tolerance.
struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation invoked outside the regime where its defining identity holds.
struct unsupported_regime_error : std::runtime_error {
  explicit unsupported_regime_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sepness
