#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace unravel {

/// Bad arguments: out-of-range indices, non-positive step sizes, length mismatches.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operands whose dimensions do not fit together.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inputs that break a structural invariant (Hermiticity, symmetry, isometry).
class ValidationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A correlation matrix outside the unit ball of the spectral norm.
class InfeasibleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when ||psi + dpsi|| collapses; the step size is far too large.
class StepFailure : public std::runtime_error {
 public:
  StepFailure(std::size_t step, double norm)
      : std::runtime_error("step " + std::to_string(step) + ": ||psi + dpsi|| = " +
                           std::to_string(norm) + " < 0.1, reduce dt"),
        step_(step),
        norm_(norm) {}

  std::size_t step() const noexcept { return step_; }
  double norm() const noexcept { return norm_; }

 private:
  std::size_t step_;
  double norm_;
};

}  // namespace unravel
