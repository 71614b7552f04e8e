#pragma once

#include <stdexcept>
#include <string>

namespace ffn {

// Base class for every error the library raises on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape / dimension mismatch between tensors.
struct DimensionError : Error {
    using Error::Error;
};

// A precondition of an operation was violated (non-scalar loss,
// non-contiguous mask, trials too small, ...).
struct ContractError : Error {
    using Error::Error;
};

// A reduction had nothing to reduce over (fully masked softmax row,
// empty context, ...).
struct DegenerateError : Error {
    using Error::Error;
};

// NaN/Inf showed up where finite values are required.
struct NumericError : Error {
    using Error::Error;
};

// Bad input data (gold index out of range, empty dataset, ...).
struct DataError : Error {
    using Error::Error;
};

// Malformed external file.
struct ParseError : Error {
    using Error::Error;
};

}  // namespace ffn
