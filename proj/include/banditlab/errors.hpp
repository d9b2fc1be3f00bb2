#pragma once

#include <stdexcept>
#include <string>

namespace banditlab {

// Invalid configuration values or config-file content. CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation was called in a state that does not allow it (e.g. step after done).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Reference set missing, empty after filtering, malformed, or built for a different environment.
class ReferenceSetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace banditlab
