#pragma once

#include <stdexcept>
#include <string>

namespace jumpflow {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad shapes, out-of-range parameters, schema violations.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: integrator blow-up, step budget exhausted, NaN state,
/// solver non-convergence where the caller asked for a hard failure.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A requested quantity is mathematically undefined (e.g. an infinite moment).
class DomainError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace jumpflow
