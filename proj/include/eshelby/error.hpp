#pragma once

#include <stdexcept>
#include <string>

namespace eshelby {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed values, inadmissible materials, unsupported shapes.
/// The CLI maps this to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A computation could not deliver a result at the requested accuracy
/// (singular systems, non-converged iterations, under-resolved quadrature).
/// The CLI maps this to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened or parsed.
class FileError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace eshelby
