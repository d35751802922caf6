// Error types shared across the toolkit. The CLI maps these onto exit codes
// (parse -> 2, shape -> 3, numeric -> 4), so library code should throw the
// most specific type that applies.

#ifndef KAAP_ERRORS_HPP
#define KAAP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kaap {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration: unknown model kind, rejected topology variant,
/// non-positive learning rate, out-of-range class override, and so on.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Input shape does not match what the consumer declared or requires.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(what) {}
};

/// A computation produced a non-finite value.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

/// Malformed input file (JSON, CSV, model/sample documents).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what) {}
};

}  // namespace kaap

#endif  // KAAP_ERRORS_HPP
