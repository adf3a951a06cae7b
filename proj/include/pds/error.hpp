#pragma once

#include <stdexcept>
#include <string>

namespace pds {

// Every failure raised by the library derives from Error so callers can map
// categories onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller handed in something outside an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Inconsistent or impossible configuration (mode vs. streams, bad values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Weighted least squares design has fewer independent rows than unknowns.
class DegenerateFit : public Error {
 public:
  using Error::Error;
};

// Kriging saddle system could not be factored.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

// No previous state to dead-reckon from.
class MissingState : public Error {
 public:
  using Error::Error;
};

// Malformed input file; carries the offending 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a data invariant (ordering, emptiness).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace pds
