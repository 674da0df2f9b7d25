#pragma once

#include <stdexcept>
#include <string>

namespace jcfb {

// Shape/axis mismatches, non-square inputs, out-of-range site indices.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid parameter values (negative rates, non-normalized states,
// tau not an integer multiple of dt, ...).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// SVD non-convergence, truncation budget exceeded, integrator failure.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent job configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace jcfb
