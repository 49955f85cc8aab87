#pragma once

#include <stdexcept>
#include <string>

namespace dmssn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or map dimensions do not agree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration value violates a documented invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data is structurally valid but numerically unusable
/// (constant cube, degenerate statistics, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or serialization failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Optimization diverged (NaN / Inf loss or gradients).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmssn
