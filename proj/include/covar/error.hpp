#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace covar {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. `offset` is the byte offset of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Function evaluated outside its domain (log of a non-positive value, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Degenerate metric, signature mismatch, singular Jacobian, bad chart bounds.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation's precondition (index layout, chart, grid).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace covar
