#pragma once

#include <stdexcept>
#include <string>

namespace repsq {

// Base of every error the library throws. `code()` maps to CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int code() const noexcept { return 1; }
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// (1-c)^2 < (1-beta): no quantization width delivers the requested repeatability.
class InfeasibleRepeatability : public Error {
 public:
  using Error::Error;
  int code() const noexcept override { return 2; }
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

// Batch carries no usable spread for a Beta fit; callers keep their previous shapes.
class DegenerateBatch : public Error {
 public:
  using Error::Error;
};

class ZeroProposalDensity : public Error {
 public:
  using Error::Error;
};

// A sampler cannot honor the declared importance-weight bound.
class BoundViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ArtifactVersionMismatch : public Error {
 public:
  using Error::Error;
  int code() const noexcept override { return 4; }
};

}  // namespace repsq
