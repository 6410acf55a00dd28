#pragma once

#include <stdexcept>
#include <string>

namespace lqtp {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data is malformed. `field()` names the offending entry (a key path
/// such as "Q" or "A[1]").
class FieldError : public Error {
 public:
  FieldError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A numerical procedure could not produce a certified result. `value()`
/// carries the quantity that triggered the failure (smallest singular value,
/// minimum eigenvalue, residual, time, ...).
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double value)
      : Error(what), value_(value) {}

  double value() const noexcept { return value_; }

 private:
  double value_;
};

}  // namespace lqtp
