#pragma once

#include <stdexcept>
#include <string>

namespace fedfim {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand lengths or shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but cannot produce a meaningful result
/// (zero weight sum, empty batch, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared, or a curvature quantity was non-positive.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary or text file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Configuration rejected before any round runs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure: missing, unreadable, truncated or unwritable file.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedfim
