#pragma once

#include <stdexcept>
#include <string>

namespace pirnn {

// Shapes of two operands do not fit together.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An API was called outside its preconditions.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid configuration values or unknown config keys.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; the message carries the location.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint or dataset does not match the declared model schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN or Inf in values, gradients or losses.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pirnn
