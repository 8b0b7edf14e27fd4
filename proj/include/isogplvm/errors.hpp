#pragma once

#include <stdexcept>
#include <string>

namespace isogplvm {

// Input that violates a documented precondition (shape, range, format).
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Numerical breakdown: Cholesky failure after jitter escalation, non-finite
// objective, singular systems.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace isogplvm
