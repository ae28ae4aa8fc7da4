#pragma once

#include <stdexcept>
#include <string>

namespace forgescope {

/// Unreadable or unusable input file.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or inconsistent configuration, detected at startup.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Persisting to the corpus store failed; progress up to the failure is kept.
class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace forgescope
