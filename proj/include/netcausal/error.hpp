#pragma once

#include <stdexcept>

namespace netcausal {

/// Raised when caller-supplied data, files, names or parameters are invalid.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot produce a result for valid input.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace netcausal
