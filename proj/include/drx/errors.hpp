#pragma once

#include <stdexcept>
#include <string>

namespace drx {

// Exception hierarchy. The CLI maps each family onto a process exit code.

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DecodeError : public DataError {
 public:
  using DataError::DataError;
};

// Checkpoint file problems: damaged bytes, foreign format version, or an
// architecture that does not match the model being loaded into.
class CheckpointError : public DataError {
 public:
  enum class Kind { corrupt, version, config_mismatch };
  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace drx
