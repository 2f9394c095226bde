#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pssim {

// Invalid run/sweep configuration (bad sizes, divisibility, ranges, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector/model dimension mismatch.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Label outside the convention required by the active loss
// ({0,1} for logistic, {-1,1} for hinge; -1/0 are interchangeable on input).
class LabelConventionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation applied to a dataset layout it does not support.
class UnsupportedLayoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// AUC requested for a single-class label vector.
class UndefinedAucError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Base for dataset ingestion failures; CLI maps these to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : DataError("line " + std::to_string(line) + ", column " +
                  std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class NonMonotonicIndexError : public DataError {
 public:
  explicit NonMonotonicIndexError(std::size_t line)
      : DataError("line " + std::to_string(line) +
                  ": feature indices must be strictly ascending"),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyDatasetError : public DataError {
 public:
  EmptyDatasetError() : DataError("input contains no samples") {}
};

}  // namespace pssim
