#pragma once

#include <stdexcept>
#include <string>

namespace rfsf {

// Base for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shapes do not agree.
struct DimensionError : Error {
    using Error::Error;
};

// A documented precondition was violated.
struct ContractError : Error {
    using Error::Error;
};

// Invalid configuration value or unmapped enum.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed input file.
struct FormatError : Error {
    using Error::Error;
};

// Filesystem / OS failure.
struct IoError : Error {
    using Error::Error;
};

// NaN/Inf or other numerical breakdown.
struct NumericalError : Error {
    using Error::Error;
};

// Out-of-range index (labels, classes, bins).
struct IndexError : Error {
    using Error::Error;
};

}  // namespace rfsf
