#pragma once

#include <stdexcept>
#include <string>

namespace otf {

/// Broad failure classes. The CLI maps each one onto a fixed exit code.
enum class ErrorKind { config, data, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Malformed input data, schema violations, dimension mismatches.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// A group (or group/label cell) with no members, so its expectation is zero.
class DegenerateGroupError : public DataError {
 public:
  explicit DegenerateGroupError(const std::string& what) : DataError(what) {}
};

class DimensionError : public DataError {
 public:
  explicit DimensionError(const std::string& what) : DataError(what) {}
};

/// Overflow, NaN or divergence inside a numeric routine.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

/// No fair target exists for the given constraint matrix.
class InfeasibleError : public NumericError {
 public:
  explicit InfeasibleError(const std::string& what) : NumericError(what) {}
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numeric: return 4;
  }
  return 1;
}

}  // namespace otf
