#pragma once

#include <stdexcept>
#include <string>

namespace shapeband {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration value. `field()` names the offending input.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class KernelValidityError : public Error {
 public:
  using Error::Error;
};

class DegenerateWindowError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (CSV rows, missing grid points, unusable windows).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A stored calibration does not match the context it is being used in.
class ContextMismatchError : public Error {
 public:
  ContextMismatchError(std::string field, const std::string& detail)
      : Error("calibration context mismatch(" + field + "): " + detail), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class ZeroCurvatureError : public Error {
 public:
  using Error::Error;
};

class EmptyRegionError : public Error {
 public:
  using Error::Error;
};

}  // namespace shapeband
