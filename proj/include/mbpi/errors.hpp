#pragma once

#include <stdexcept>
#include <string>

namespace mbpi {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or size mismatch between operands.
struct DimensionError : Error {
  using Error::Error;
};

// NaN/Inf entries or otherwise malformed numeric input.
struct InvalidInputError : Error {
  using Error::Error;
};

// Factorization or iteration failure. leading_minor is the 1-based index of
// the first non-positive pivot when a Cholesky factorization fails, else -1.
struct NumericalError : Error {
  explicit NumericalError(const std::string& what, int minor_index = -1)
      : Error(what), leading_minor(minor_index) {}
  int leading_minor;
};

// Operation not supported for the given inputs (e.g. smoothing a trace that
// mixes filter engines).
struct UnsupportedOperationError : Error {
  using Error::Error;
};

// Malformed configuration: bad enum value, missing file, inconsistent windows.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed data file. line is the 1-based offending line, or -1.
struct ParseError : Error {
  explicit ParseError(const std::string& what, long line_number = -1)
      : Error(what), line(line_number) {}
  long line;
};

}  // namespace mbpi
