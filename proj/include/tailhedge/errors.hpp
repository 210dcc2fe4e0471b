#pragma once

#include <stdexcept>
#include <string>

namespace tailhedge {

/// Caller passed arguments outside the documented domain.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure failed to converge or produced non-finite values.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed external data (files, configs). Carries row/column context when known.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
  ValidationError(const std::string& what, long row, const std::string& column)
      : std::runtime_error(what + " (row " + std::to_string(row) + ", column '" + column + "')"),
        row_(row),
        column_(column) {}

  long row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  long row_ = -1;
  std::string column_;
};

}  // namespace tailhedge
