// errors.hpp — exception types shared by all rcdecay modules

#pragma once

#include <stdexcept>
#include <string>

namespace rcdecay {

// Configuration / input problems. The CLI maps these to exit code 2.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Band or model parameters violate an invariant (Δ ≤ 0, N < 1, bad lengths).
struct InvalidSpec : ConfigError {
    using ConfigError::ConfigError;
};

// Argument outside the documented domain of an operation.
struct InvalidArgument : ConfigError {
    using ConfigError::ConfigError;
};

// Operation does not support the given coupling profile or discretization.
struct UnsupportedProfile : ConfigError {
    using ConfigError::ConfigError;
};

// Numerical breakdown. The CLI maps these to exit code 3.
struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Energy too close to a band level for a secular sum to be evaluated.
struct PoleProximity : NumericalFailure {
    using NumericalFailure::NumericalFailure;
};

// Step size of the adaptive integrator collapsed.
struct StiffFailure : NumericalFailure {
    using NumericalFailure::NumericalFailure;
};

} // namespace rcdecay
