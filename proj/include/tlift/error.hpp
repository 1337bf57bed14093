#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tlift {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. `offset()` is the byte offset of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(message + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Evaluation left the real domain of a function (log of a non-positive
/// number, division by zero, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Singular metric, or a point outside the admitted region.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// A lift failed its structural constraint (e.g. non-skew matter generator).
class ConstraintError : public Error {
 public:
  ConstraintError(const std::string& message, double violation)
      : Error(message), violation_(violation) {}

  double violation() const noexcept { return violation_; }

 private:
  double violation_;
};

/// Integration could not complete as configured.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tlift
