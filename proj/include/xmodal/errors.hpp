#pragma once

#include <stdexcept>

namespace xmodal {

// Error taxonomy shared by the library and the CLI, which maps these onto
// process exit codes (config -> 1, I/O -> 2, numeric -> 3).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mismatched vector/matrix dimensions.
struct ShapeError : Error {
  using Error::Error;
};

// Argument outside its valid range (tau <= 0, non-finite logits, ...).
struct DomainError : Error {
  using Error::Error;
};

// Invalid configuration or usage.
struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Non-finite values encountered during training.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace xmodal
