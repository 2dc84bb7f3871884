#pragma once

#include <stdexcept>
#include <string>

namespace covis {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateQuaternion : public Error {
 public:
  using Error::Error;
};

class InvalidDepth : public Error {
 public:
  using Error::Error;
};

/// Inconsistent inputs (dimension mismatch, bad config values, bad manifest).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated serialized data.
class FormatError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace covis
