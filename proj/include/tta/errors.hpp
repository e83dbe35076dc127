#pragma once

#include <stdexcept>
#include <string>

namespace tta {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or axis disagreement between tensors.
struct DimError : Error {
    using Error::Error;
};

// A precondition other than a shape was violated (non-scalar loss, R <= -1, ...).
struct ContractError : Error {
    using Error::Error;
};

// Invalid model/train/attention configuration, detected at build time.
struct ConfigError : Error {
    using Error::Error;
};

// File could not be read, written, or parsed.
struct IoError : Error {
    using Error::Error;
};

// Non-finite value or other numeric failure.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace tta
