#pragma once

#include <stdexcept>
#include <string>

namespace qmnewt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Window index outside the range the operation accepts.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite point or function value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// A required piece of state (cached f-values, previous model) is missing.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or problem parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Could not generate a usable initial window.
class InitializationError : public Error {
 public:
  using Error::Error;
};

/// A step vector has (numerically) zero length; the offending point must be
/// re-sampled.
class DegenerateGeometry : public Error {
 public:
  DegenerateGeometry(const std::string& what, int position)
      : Error(what), position_(position) {}

  /// Window position of the degenerate step (1..n).
  int position() const noexcept { return position_; }

 private:
  int position_;
};

/// A linear solve could not reach an acceptable residual.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, double residual)
      : Error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A rank-one inverse update was refused by its denominator guard; the caller
/// keeps the old matrix.
class UpdateRejected : public Error {
 public:
  using Error::Error;
};

}  // namespace qmnewt
