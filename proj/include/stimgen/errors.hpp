#pragma once

#include <stdexcept>

namespace stimgen {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes, so new error types should derive from one of the roots below.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad arguments, unknown config keys, invalid architecture.
struct ConfigError : Error { using Error::Error; };

// Anything wrong with external data: corpora, CSV files, checkpoints.
struct DataError : Error { using Error::Error; };

// Tensor shape mismatches. Messages name both offending shapes.
struct ShapeError : Error { using Error::Error; };

// Non-finite values where finite ones are required.
struct NumericError : Error { using Error::Error; };

// Roughness scoring needs a reference with nonzero total variation.
struct DegenerateReferenceError : Error { using Error::Error; };

// Checkpoint loading failures, one type per distinguishable cause.
struct CheckpointError : DataError { using DataError::DataError; };
struct CheckpointFormatError : CheckpointError { using CheckpointError::CheckpointError; };
struct CheckpointVersionError : CheckpointError { using CheckpointError::CheckpointError; };
struct CheckpointTruncatedError : CheckpointError { using CheckpointError::CheckpointError; };
struct CheckpointChecksumError : CheckpointError { using CheckpointError::CheckpointError; };

}  // namespace stimgen
