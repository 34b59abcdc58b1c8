#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace qmm {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input that violates a domain invariant. `field()` names the offending
// object (a state label, a JSON path, an argument name) when one is known.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::string message, std::string field = {})
      : Error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Numerical pathology: eigensolver did not converge, a monotonicity
// assertion failed, the LP pivot guard tripped.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Compact rendering of a number for error messages.
inline std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace qmm
