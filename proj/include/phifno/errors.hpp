#pragma once

#include <stdexcept>
#include <string>

namespace phifno {

// Error categories; the CLI maps them onto exit codes (config 1,
// numerical 2, io 3).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace phifno
