#pragma once

#include <stdexcept>
#include <string>

namespace sinkflow {

// Base for failures that invalidate a numerical result (spectra out of range,
// diverging iterations, incompatible shapes). The CLI maps these to exit code 2.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidInput : NumericalError {
    using NumericalError::NumericalError;
};

struct NotPSD : NumericalError {
    using NumericalError::NumericalError;
};

struct DimensionMismatch : NumericalError {
    using NumericalError::NumericalError;
};

struct NegativeEigenvalue : NumericalError {
    using NumericalError::NumericalError;
};

struct StepDiverged : NumericalError {
    using NumericalError::NumericalError;
};

struct NotConverged : NumericalError {
    using NumericalError::NumericalError;
};

struct DimensionTooLarge : NumericalError {
    using NumericalError::NumericalError;
};

// User-facing configuration problems; exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem problems; exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace sinkflow
