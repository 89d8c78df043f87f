#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dacapo {

// Error taxonomy.  The CLI maps these onto process exit codes, so new
// failure modes should reuse one of the categories below instead of
// inventing a fresh type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad knob value, bad combination of knobs, unknown config key.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input file, truncated stream, bad magic, I/O failure.
struct ParseError : Error {
  using Error::Error;
};

// No array partition satisfies the realtime budget.
struct InfeasibleError : Error {
  using Error::Error;
};

// Non-finite input handed to the block-float encoder.
struct EncodingError : ParseError {
  using ParseError::ParseError;
};

inline uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

// Honors DACAPO_SIM_THREADS if set; otherwise leaves the OpenMP default.
void apply_thread_cap();

}  // namespace dacapo
