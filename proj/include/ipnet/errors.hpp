#pragma once

#include <stdexcept>
#include <string>

namespace ipnet {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix/tensor dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad user-supplied parameter (counts, ratios, config values).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Matrix inversion hit a pivot below the singularity threshold.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, double pivot_magnitude)
      : Error(what), pivot_magnitude_(pivot_magnitude) {}
  double pivot_magnitude() const { return pivot_magnitude_; }

 private:
  double pivot_magnitude_ = 0.0;
};

/// Input is structurally degenerate for the requested operation
/// (zero matrix, zero diagonal entry, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Operation called in the wrong order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File exists but its magic/version/layout is not what we expect.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

/// File payload does not match its checksum.
class ChecksumError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace ipnet
