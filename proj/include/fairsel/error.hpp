#pragma once

#include <stdexcept>
#include <string>

namespace fairsel {

/// Bad spec file, missing column, bad flag value. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unusable data. Maps to CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when group metrics are requested but only one protected group is present.
class GroupCoverageError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace fairsel
