#pragma once

#include <stdexcept>
#include <string>

namespace fedkd {

// Error taxonomy. ConfigError maps to CLI exit code 2, everything else to 3.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data (malformed CSV, out-of-range label, empty dataset).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension mismatch between tensors/models.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violation of the federation wire contract (invalid soft-label rows,
// mismatched rounds, empty aggregation).
struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values encountered during training.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fedkd
