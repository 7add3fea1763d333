#pragma once

#include <stdexcept>
#include <string>

namespace tripart {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: arguments, schemas, data integrity. Maps to CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DataIntegrityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class PipelineError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Numerical breakdown during sampling or analysis. Maps to CLI exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DecompositionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NumericalFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateSeriesError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A truncated-normal interval whose probability mass underflows.
/// `observation` is -1 until a caller that knows the record attaches it.
class DegenerateTailError : public NumericalError {
 public:
  DegenerateTailError(const std::string& what, long long observation = -1)
      : NumericalError(what), observation_(observation) {}
  long long observation() const noexcept { return observation_; }

 private:
  long long observation_;
};

/// File system and parse-level I/O failures. Maps to CLI exit code 4.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tripart
