#pragma once

#include <stdexcept>
#include <string>

namespace kgt {

// Invalid or inconsistent run configuration. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input files, unknown ids, missing data. CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf losses, degenerate numeric states. CLI exit code 4.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shape mismatches; always a programming error at the call site.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kgt
