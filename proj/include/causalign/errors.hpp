#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace causalign {

// Base for every error the library raises on purpose. `kind()` is a stable
// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidParams : public Error {
 public:
  explicit InvalidParams(const std::string& m) : Error("invalid_params", m) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& m) : Error("shape_mismatch", m) {}
};

class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& m) : Error("non_finite", m) {}
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(const std::string& m) : Error("training_diverged", m) {}
};

class GraphStructureError : public Error {
 public:
  explicit GraphStructureError(const std::string& m) : Error("graph_structure", m) {}
};

class NodeCorrespondenceError : public Error {
 public:
  explicit NodeCorrespondenceError(const std::string& m)
      : Error("node_correspondence", m) {}
};

class PatchError : public Error {
 public:
  explicit PatchError(const std::string& m) : Error("invalid_patch", m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io", m) {}
};

// A malformed record in a line-oriented file; `line()` is 1-based.
class CorruptRecord : public Error {
 public:
  CorruptRecord(const std::string& path, std::size_t line, const std::string& what)
      : Error("corrupt_record", path + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class RemoteError : public Error {
 public:
  explicit RemoteError(const std::string& m) : Error("remote", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

}  // namespace causalign
