#pragma once

#include <stdexcept>
#include <string>

namespace mmdk {

/// Base of every error raised by the library. The CLI maps these to exit 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file contents (bad magic, truncated payload, unparsable CSV).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A trained model was paired with a kernel built under different settings.
class MetaMismatch : public Error {
public:
    using Error::Error;
};

/// Iterative solver hit its iteration cap. `gap` is the last optimality measure
/// (KKT violation for SMO, gradient norm for the survival solver).
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double gap) : Error(what), gap_(gap) {}
    double gap() const noexcept { return gap_; }

private:
    double gap_;
};

}  // namespace mmdk
