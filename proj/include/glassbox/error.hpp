#pragma once

#include <stdexcept>
#include <string>

namespace glassbox {

// Base of every error raised by the library. The CLI exits 1 on
// ConfigError, 2 on unreadable input, parse, integrity and model file
// errors, 3 otherwise.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file (wrong column count, bad number, unknown enum).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// An input file or run directory that cannot be opened.
class InputError : public Error {
 public:
  using Error::Error;
};

// Well-formed data that violates a dataset invariant (duplicate keys,
// mixed layers, subject leakage between folds).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// A request that cannot be satisfied with the given inputs or parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Model file problems.
class ModelFormatError : public Error {
 public:
  using Error::Error;
};
class CorruptModelError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};
class ModelVersionError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

}  // namespace glassbox
