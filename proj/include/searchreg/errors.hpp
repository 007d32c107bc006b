#pragma once

#include <stdexcept>
#include <string>

namespace sreg {

// Malformed or inconsistent external data (images, configs, checkpoints).
// Maps to CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or diverging optimization. Maps to CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sreg
