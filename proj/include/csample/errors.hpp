#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csample {

// Base of every library error. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
  DimensionMismatch(const std::string& where, std::size_t expected, std::size_t got)
      : Error(where + ": dimension mismatch (expected " + std::to_string(expected) +
              ", got " + std::to_string(got) + ")") {}
};

class NotPositiveDefinite : public Error {
public:
  explicit NotPositiveDefinite(std::size_t pivot)
      : Error("matrix is not positive definite (pivot " + std::to_string(pivot) + ")"),
        pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

private:
  std::size_t pivot_;
};

// Numerical failures that are not tied to a particular matrix.
class NumericalError : public Error {
public:
  using Error::Error;
};

class DegenerateComponent : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class InsufficientSamples : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class ZeroReference : public NumericalError {
public:
  ZeroReference() : NumericalError("reference vector has zero norm") {}
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace csample
