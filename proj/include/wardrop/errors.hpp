#pragma once

#include <stdexcept>
#include <string>

namespace wardrop {

/// An iterative numerical procedure failed to meet its tolerance.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The inner concave ascent for the primal density did not converge.
/// Carries the best lower bound found for the supremum.
class ConjugateError : public NumericError {
 public:
  ConjugateError(const std::string& what, double lower_bound)
      : NumericError(what), lower_bound_(lower_bound) {}
  double lower_bound() const noexcept { return lower_bound_; }

 private:
  double lower_bound_;
};

/// Invalid or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wardrop
