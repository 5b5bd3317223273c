#pragma once

#include <stdexcept>
#include <string>

namespace fedkan {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration (widths, grid, hyperparameters, files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A caller broke an API precondition (shape mismatch, stale cache, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Parameter layouts that cannot be exchanged between two models.
class IncompatibleWeights : public Error {
 public:
  using Error::Error;
};

// Malformed traffic input data.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or parameter.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedkan
