#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slelab {

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Argument too close to a pole of a meromorphic function.
class PoleError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A Monte Carlo run produced statistics too poor to support a verdict.
class QualityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure inside a simulation (non-finite state and similar).
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// The observer point at 1 was swallowed by the curve.
class CurveHitOneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure (factorization, degenerate sample) failed.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace slelab
