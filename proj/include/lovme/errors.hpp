#pragma once

#include <stdexcept>
#include <string>

namespace lovme {

// Base class for all errors raised by the library. Subclasses map onto the
// CLI exit codes: config/parameter -> 2, file format -> 3, numeric/chain -> 4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Dimension or layout mismatch between tensors, masks and inputs.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite value encountered where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid argument value (out of range, empty where nonempty required, ...).
class ParamError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents; message carries a byte offset where known.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Request exceeds a hard resource cap (e.g. exhaustive enumeration size).
class CapacityError : public Error {
 public:
  using Error::Error;
};

class TrainError : public Error {
 public:
  TrainError(const std::string& what, std::size_t epoch)
      : Error(what), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

class ChainError : public Error {
 public:
  ChainError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lovme
