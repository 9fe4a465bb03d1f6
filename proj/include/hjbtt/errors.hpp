#pragma once

#include <stdexcept>
#include <string>

namespace hjbtt {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent shapes, dimensions or positions passed to an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: breakdown, divergence, inadmissible policy (CLI exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A linear system or orthogonalization is too ill-conditioned to proceed.
class ConditioningError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// An algorithmic invariant was violated, e.g. ALS increased the loss.
class ConsistencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Too many closed-loop trajectories diverged from the sample points.
class InadmissiblePolicyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

namespace detail {

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace detail

}  // namespace hjbtt
