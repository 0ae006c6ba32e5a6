#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nestco {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes or layer dimensions do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value is outside its documented domain (label range, k range, rate...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A call violated an operation's precondition (non-scalar loss, tiny batch...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace nestco
