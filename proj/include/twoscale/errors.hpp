#pragma once

#include <stdexcept>
#include <string>

namespace twoscale {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or grid sizes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition on the input values failed (non mean-zero vector,
/// value outside a tabulated interval, invalid parameter).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Iteration failure, non-finite state or step-size underflow.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace twoscale
