#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wmd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad caller-supplied parameter (worker count, lambda, shapes).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Sparse structure that violates CSR invariants or indexes out of bounds.
class StructuralError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Zero denominator or nonpositive iterate inside the Sinkhorn loop.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A query, histogram or document that carries no mass.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace wmd
