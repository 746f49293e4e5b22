#pragma once

#include <stdexcept>
#include <string>

namespace mjp {

// Bad user-supplied configuration (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation was called outside its domain, e.g. a uniformization rate
// below the largest exit rate.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The input is well-formed but the operation does not handle it
// (e.g. Gillespie simulation of a time-dependent generator).
class UnsupportedInput : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed data file. Carries the 1-based line number when known.
class IngestionError : public std::runtime_error {
 public:
  IngestionError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mjp
