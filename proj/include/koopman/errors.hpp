#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace koopman {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input: out-of-range indices, malformed configs, dimension mismatches.
// CLI maps this to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A structural precondition fails, e.g. an index set is not a subsystem.
class StructuralError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// An enumeration or search exceeded its cap. Carries the count found so far.
// CLI maps this to exit code 3.
class CapExceededError : public Error {
 public:
  CapExceededError(const std::string& msg, std::size_t count)
      : Error(msg), count_(count) {}
  std::size_t count() const { return count_; }

 private:
  std::size_t count_;
};

// Numerical failure: eigensolver breakdown, singular factorization, etc.
// CLI maps this to exit code 4.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A trajectory left the representable range. Carries the offending step.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& msg, std::size_t step)
      : NumericalError(msg), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Fitting data is degenerate (all-zero features, empty snapshot set).
class DegenerateDataError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A mathematical hypothesis of an algorithm is violated by the data
// (e.g. the distinctness hypothesis of atomic gluing).
class HypothesisError : public Error {
 public:
  using Error::Error;
};

// Two inputs that must agree (marginals, atom counts) do not.
class IncompatibilityError : public Error {
 public:
  using Error::Error;
};

// A tolerance-based matching had more than one candidate.
class AmbiguityError : public Error {
 public:
  using Error::Error;
};

}  // namespace koopman
