#pragma once

#include <stdexcept>
#include <string>

namespace naslab {

// Shape or wiring problem in a network description.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation was invoked in the wrong lifecycle state.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Caller violated a documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad configuration (space definition, CLI config, experiment knobs).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (tables, persisted documents).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace naslab
