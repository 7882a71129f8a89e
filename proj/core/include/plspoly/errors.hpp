#pragma once

#include <stdexcept>
#include <string>

namespace plspoly {

// Caller handed us something that violates an operation's contract
// (bad dimensions, unparseable file, non-finite input, ...).
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// A kernel failed to converge or a quantity degenerated past the point
// where the requested result is meaningful.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// The request is well-posed but exceeds a resource budget; the message
// names the budget and, where one exists, the cheaper alternative route.
struct CapabilityError : std::runtime_error {
  explicit CapabilityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace plspoly
