#pragma once

#include <stdexcept>
#include <string>

namespace gradfilter {

/// Tensor or layer dimensions are inconsistent with the requested operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration value is outside its legal range (stride != 1, r == 0, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A file on disk does not follow the expected container layout.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gradfilter
