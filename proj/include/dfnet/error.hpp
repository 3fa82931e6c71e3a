#pragma once

#include <stdexcept>
#include <string>

namespace dfnet {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  Usage = 1,
  Data = 2,
  Divergence = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Contract violations on arguments (bad shapes, specs, configs).
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

/// Malformed or missing data (files, manifests, masks).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(ErrorKind::Divergence, what) {}
};

}  // namespace dfnet
