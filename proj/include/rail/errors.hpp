#pragma once

#include <stdexcept>
#include <string>

namespace rail {

// Invalid or inconsistent configuration (bad keys, invariant violations).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A trajectory or checkpoint was produced under a different env/sensor setup.
class FingerprintMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Training produced non-finite parameters.
class NumericalAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rail
