#pragma once

#include <stdexcept>
#include <string>

namespace nlpcm {

/// Base class for all library failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed user-facing input: unknown case id, bad config file, ...
struct ConfigError : Error {
  using Error::Error;
};

/// A parameter or field value outside its admissible range.
struct AdmissibilityError : Error {
  using Error::Error;
};

/// Kernel evaluated at a point where it is singular.
struct SingularEvaluationError : AdmissibilityError {
  using AdmissibilityError::AdmissibilityError;
};

/// The quadrature constraint system could not be satisfied to tolerance.
struct UnisolvencyError : Error {
  using Error::Error;
};

/// A linear solve, eigenvalue solve, or adaptive integration failed.
struct SolverError : Error {
  using Error::Error;
};

/// A structural invariant of the discretization was violated at runtime.
struct InvariantError : Error {
  using Error::Error;
};

}  // namespace nlpcm
