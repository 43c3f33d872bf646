#pragma once

#include <stdexcept>
#include <string>

namespace soap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad feature vectors, invalid models, rejected action specs.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Syntax errors in model, database, WCNF or dataset files.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A plan failed re-validation. Always indicates an encoding or decoding bug.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace soap
