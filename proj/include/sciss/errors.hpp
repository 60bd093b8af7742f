#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sciss {

// Base of every error raised by the library. Estimation failures are
// reported as exceptions; callers that aggregate many fits (the simulation
// harness, the CLI) catch `Error` and record the message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class QTooLarge : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DegenerateSurrogate : public Error {
 public:
  using Error::Error;
};

class NumericalUnderflow : public Error {
 public:
  using Error::Error;
};

class EmptyUnlabeled : public Error {
 public:
  using Error::Error;
};

class InvalidMechanism : public Error {
 public:
  using Error::Error;
};

// Raised by the dataset reader; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class EmptyLabeled : public Error {
 public:
  using Error::Error;
};

}  // namespace sciss
