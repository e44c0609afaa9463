#pragma once

#include <stdexcept>
#include <string>

namespace rumour {

// Invalid inputs, files, or configuration values. CLI maps this to exit 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training-time failures (NaN loss, degenerate optimization). CLI exit 3.
struct TrainError : std::runtime_error {
  explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rumour
