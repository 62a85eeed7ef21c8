#pragma once

#include <stdexcept>
#include <string>

namespace fairsweep {

// Invalid configuration, parameters, or shapes. CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent data (files, records, invariant violations).
// CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fairsweep
