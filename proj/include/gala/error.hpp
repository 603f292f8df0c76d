#pragma once

#include <stdexcept>
#include <string>

namespace gala {

// Error taxonomy. CLI maps IoError/FormatError to exit 2, everything else to exit 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or missing input file content.
struct FormatError : Error {
    using Error::Error;
};

// Structurally inconsistent data (edge across graphs, bad indicator, ...).
struct IntegrityError : Error {
    using Error::Error;
};

// Invalid argument value or degenerate input.
struct ArgumentError : Error {
    using Error::Error;
};

// Tensor/width mismatch between data and model.
struct ShapeError : Error {
    using Error::Error;
};

// Violated operation precondition.
struct ContractError : Error {
    using Error::Error;
};

// Unusable model state (NaN parameters, shape-mismatched checkpoint).
struct ModelError : Error {
    using Error::Error;
};

// Filesystem-level failure (unreadable path, write failure).
struct IoError : Error {
    using Error::Error;
};

}  // namespace gala
