#pragma once

#include <stdexcept>
#include <string>

namespace downscale {

// Base for everything this library throws; catch this at CLI level.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched grid/vector dimensions.
struct ShapeError : Error {
    using Error::Error;
};

// Coordinate outside a grid's bounds, or incompatible domains.
struct DomainError : Error {
    using Error::Error;
};

// Non-positive coefficient sample where uniform ellipticity is required.
struct EllipticityError : Error {
    using Error::Error;
};

// Iterative solver hit its iteration cap before reaching tolerance.
struct IterationLimitError : Error {
    double final_residual;
    IterationLimitError(const std::string& msg, double residual)
        : Error(msg), final_residual(residual) {}
};

// Training or sampling produced a non-finite value.
struct DivergenceError : Error {
    long step;
    DivergenceError(const std::string& msg, long at_step)
        : Error(msg), step(at_step) {}
};

// Relative error against a reference with zero norm.
struct DegenerateReferenceError : Error {
    using Error::Error;
};

// Bad or missing configuration input (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

// File read/write failure.
struct IoError : Error {
    using Error::Error;
};

}  // namespace downscale
