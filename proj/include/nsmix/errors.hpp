#pragma once

#include <stdexcept>
#include <string>

namespace nsmix {

/// Invalid argument or mismatched operands (grid, mesh, sizes).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Rejected configuration (schema, bounds, non-degeneracy).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Blow-up, non-convergence or another numerical breakdown.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Time integration produced non-finite or runaway coefficients.
class IntegrationFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace nsmix
