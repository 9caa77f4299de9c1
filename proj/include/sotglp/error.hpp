#pragma once

#include <stdexcept>
#include <string>

namespace sotglp {

// Base class for everything this library throws on bad input or broken
// contracts. Callers that only want "did it fail" can catch this one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatch between matrix operands.
struct DimensionError : Error {
  using Error::Error;
};

// A documented precondition was violated (unnormalized inputs, bad config,
// untracked loss, empty active set, ...).
struct ContractError : Error {
  using Error::Error;
};

// Out-of-range class / label / row index.
struct IndexError : Error {
  using Error::Error;
};

// A count parameter is outside the supported range (K > P, K > 8 for the
// factorial oracle, ...).
struct SizeError : Error {
  using Error::Error;
};

// Numerically degenerate input, e.g. a zero row fed to a normalizer.
struct DegenerateInputError : Error {
  using Error::Error;
};

// Malformed serialized data.
struct ParseError : Error {
  using Error::Error;
};

// Serialized data carries an unsupported format_version.
struct VersionError : ParseError {
  using ParseError::ParseError;
};

// Rejection sampling failed to produce valid data.
struct GenerationError : Error {
  using Error::Error;
};

}  // namespace sotglp
