#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nsto {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A problem description violates a contract (bad dimensions, empty regions, ...).
class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

/// Array lengths or matrix shapes do not match.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or an iteration that failed to produce a usable result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid combination of user-supplied arguments.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Collects every problem found while validating a configuration document.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> errors)
      : Error(join(errors)), errors_(std::move(errors)) {}

  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string out = "invalid problem specification:";
    for (const auto& e : errors) {
      out += "\n  - ";
      out += e;
    }
    return out;
  }

  std::vector<std::string> errors_;
};

}  // namespace nsto
