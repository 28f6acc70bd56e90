#pragma once

#include <stdexcept>
#include <string>

namespace kimura {

/// Bad input: an invalid spec, config field, or precondition violation.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a finite answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The invariant density is not integrable (an endpoint is not transverse).
class NonIntegrable : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Quadrature of the scale function diverges at an endpoint.
class DivergentIntegral : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Implicit Kimura step with negative radicand; never clamped silently.
class NegativeDiscriminantGuard : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace kimura
