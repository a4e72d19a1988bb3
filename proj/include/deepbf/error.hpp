#pragma once

#include <stdexcept>
#include <string>

namespace deepbf {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A distribution, model or configuration parameter violates its invariants.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// An exact marginal likelihood was requested from a model that has none.
class NoOracle : public Error {
public:
    using Error::Error;
};

/// The model does not provide the requested capability (e.g. a conjugate
/// posterior predictive sampler).
class Unsupported : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or similar arithmetic breakdown.
class NumericFailure : public Error {
public:
    using Error::Error;
};

/// Malformed configuration, file or schema violation.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace deepbf
