#pragma once

#include <stdexcept>
#include <string>

namespace graphsplit {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

// Scheme matrices fail a structural requirement (explicitness, standing assumptions).
struct SchemeError : Error {
  using Error::Error;
};

// Implicit (non-triangular) schemes need an inner solve that is not provided.
struct UnsupportedSchemeError : SchemeError {
  using SchemeError::SchemeError;
};

// Pᵀ - R is not in the row space of Mᵀ, so U has no exact solution.
struct InconsistentSchemeError : SchemeError {
  using SchemeError::SchemeError;
};

struct StepSizeError : Error {
  StepSizeError(const std::string& what, double bound) : Error(what), bound(bound) {}
  double bound;
};

struct CapExceededError : Error {
  using Error::Error;
};

struct DivergenceError : Error {
  DivergenceError(const std::string& what, long iteration)
      : Error(what), iteration(iteration) {}
  long iteration;
};

struct GraphError : Error {
  using Error::Error;
};

}  // namespace graphsplit
