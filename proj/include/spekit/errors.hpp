#pragma once

#include <stdexcept>
#include <string>

namespace spekit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition (bad rates, empty input, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// The requested quantity is mathematically undefined for the given inputs.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Least-squares failure that cannot be reported through FitResult.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content; message carries a byte offset or line number.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace spekit
