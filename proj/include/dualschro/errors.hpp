#pragma once

#include <stdexcept>
#include <string>

namespace dualschro {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated an operation precondition (bad argument, wrong regime).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Evaluation outside the tabulated range of a transform.
class RangeError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure broke down (non-convergence, non-finite values).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// No sub- or super-solution certificate could be produced at this lambda.
class CertificateError : public Error {
public:
    using Error::Error;
};

/// Monotone iteration produced a non-monotone iterate (bad shift or bad start).
class MonotonicityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace dualschro
