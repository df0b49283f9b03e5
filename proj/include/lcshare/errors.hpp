#pragma once

#include <stdexcept>
#include <string>

namespace lcshare {

// Bad user input: malformed files, out-of-range parameters, invalid flags.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Synthesis could not produce a certified controller.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

// A run aborted mid-flight (collision guard, numerical blow-up).
class RuntimeAbort : public std::runtime_error {
 public:
  explicit RuntimeAbort(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lcshare
