#pragma once

#include <stdexcept>
#include <string>

namespace qexpand {

// Error taxonomy mirrored by the CLI exit codes:
//   ConfigError -> 1, DataError -> 2, NumericError -> 3.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension / length mismatches. Treated as data problems by the CLI.
struct ShapeError : DataError {
  explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

}  // namespace qexpand
