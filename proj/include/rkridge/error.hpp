#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rkridge {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated a precondition: bad index, mismatched dimensions, invalid configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A factorization or iteration could not complete (non-SPD matrix, Jacobi stall, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Input text could not be parsed. `line()` is 1-based; 0 means "not line specific".
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what, bool prefix_line = true)
      : Error(line == 0 || !prefix_line ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Loaded data parsed fine but is internally inconsistent.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace rkridge
