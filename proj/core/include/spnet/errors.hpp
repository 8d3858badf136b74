#pragma once

#include <stdexcept>
#include <string>

namespace spnet {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or non-finite input data.
class InputError : public Error {
 public:
  using Error::Error;
};

// A configuration value outside its valid range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Tensor or attribute dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An operation invoked in the wrong state, e.g. backward before forward.
class StateError : public Error {
 public:
  using Error::Error;
};

// The input degenerates somewhere along the pipeline (e.g. an empty level).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// A metric over an empty or all-absent confusion matrix.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// NaN or infinity reached a place where it must not propagate.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

}  // namespace spnet
