#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace headroom {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad invocation or configuration (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data that cannot be read or violates a data contract (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

// Malformed record in a line-oriented input file.
class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Failure talking to the LLM endpoint (exit code 3).
class UpstreamError : public Error {
 public:
  using Error::Error;
};

class AuthError : public UpstreamError {
 public:
  using UpstreamError::UpstreamError;
};

}  // namespace headroom
