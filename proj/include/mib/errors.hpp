#pragma once

#include <stdexcept>
#include <string>

namespace mib {

// Problems with input data: missing directories, malformed files,
// empty corpora, shape mismatches between files and a checkpoint.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a training step produces a non-finite loss or gradient.
// Carries enough context to locate the offending step.
struct NonFiniteLossError : std::runtime_error {
  explicit NonFiniteLossError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace mib
