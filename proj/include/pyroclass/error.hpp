#pragma once

#include <stdexcept>
#include <string>

namespace pyroclass {

/// Base of every error the library throws. The CLI maps the concrete type to
/// an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents disagree with what an operation needs.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (depth, rates, fractions, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Base for problems with input data: manifests, labels, images.
class DataError : public Error {
 public:
  using Error::Error;
};

class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class DecodeError : public DataError {
 public:
  using DataError::DataError;
};

/// Dataset cannot be split or balanced as requested.
class StratificationError : public DataError {
 public:
  using DataError::DataError;
};

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public NumericError {
 public:
  TrainingDivergedError(int epoch, const std::string& what)
      : NumericError(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pyroclass
