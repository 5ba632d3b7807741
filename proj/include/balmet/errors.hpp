#pragma once

#include <stdexcept>
#include <string>

namespace balmet {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Argument inside the domain but outside the range where the truncated
// model is trustworthy (e.g. an index too close to the truncation order).
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// A numerical procedure could not reach the requested accuracy.  The best
// estimate and an error bound are kept so callers can still report them.
class AccuracyError : public std::runtime_error {
 public:
  AccuracyError(const std::string& what, double estimate, double error_bound)
      : std::runtime_error(what), estimate_(estimate), error_bound_(error_bound) {}

  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

// An iteration ran out of sweeps (or stopped contracting).
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double last_deviation)
      : std::runtime_error(what), last_deviation_(last_deviation) {}

  double last_deviation() const noexcept { return last_deviation_; }

 private:
  double last_deviation_;
};

}  // namespace balmet
