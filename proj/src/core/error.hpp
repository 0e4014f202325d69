#pragma once

#include <stdexcept>
#include <string>

namespace spmkd {

// Base of the library's error taxonomy. The C API maps each subclass to a
// status code; everything inside the core throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or axis disagreement between tensors / layers.
struct DimensionError : Error {
  using Error::Error;
};

// Bad or inconsistent configuration values.
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem trouble: unreadable, unwritable, missing.
struct IoError : Error {
  using Error::Error;
};

// Malformed file contents. `offset` is the byte offset (binary files) or
// line number (text files) of the first offending position.
struct ParseError : Error {
  ParseError(const std::string& msg, long long offset_)
      : Error(msg + " (at offset " + std::to_string(offset_) + ")"), offset(offset_) {}
  long long offset = 0;
};

// Non-finite values where finite ones are required (diverged training,
// audit of a NaN loss).
struct NumericError : Error {
  using Error::Error;
};

// Checkpoint-to-model weight transfer mismatch.
struct TransferError : Error {
  using Error::Error;
};

// Operation invoked against an object in the wrong state or with inputs
// violating a documented contract.
struct StateError : Error {
  using Error::Error;
};

}  // namespace spmkd
