#pragma once

#include <stdexcept>
#include <string>

namespace larp {

// Base class for every error raised by the library. The CLI maps
// ConfigError to exit code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched dimensions between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation
// (non-positive temperature, zero-norm vector, empty set, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Input data violates a structural invariant (duplicate ids, cold-start
// overlap, dangling references, malformed records).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Lookup of an id that is not registered.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Invalid or incomplete configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace larp
