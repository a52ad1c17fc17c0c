#pragma once

#include <stdexcept>
#include <string>

namespace prism {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not line up for the requested operation.
struct ShapeError : Error {
  using Error::Error;
};

// A forward pass produced NaN/Inf, or a gradient went non-finite.
struct NumericError : Error {
  using Error::Error;
};

// Corpus/schema ingestion or validation failure.
struct DataError : Error {
  using Error::Error;
};

// Invalid configuration value; the CLI maps this to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// API misuse, e.g. backward() called twice without reset().
struct StateError : Error {
  using Error::Error;
};

}  // namespace prism
