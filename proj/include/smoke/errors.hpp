#pragma once

#include <stdexcept>
#include <string>

namespace smoke {

/// Input data is structurally invalid (missing file, bad size, bad label).
/// The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical procedure failed (non-convergence, non-finite values).
/// The CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace smoke
