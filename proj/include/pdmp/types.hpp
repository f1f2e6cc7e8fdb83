#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace pdmp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed model file: parse failure, missing field or table of the wrong shape.
class ModelError : public Error {
public:
    using Error::Error;
};

/// Requested motion past the boundary hitting time.
class FlowError : public Error {
public:
    using Error::Error;
};

/// Iterative procedure failed to converge (or the fixed point is not unique).
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double subdominant_modulus = -1.0)
        : Error(what), subdominant_modulus_(subdominant_modulus) {}
    /// Estimated modulus of the subdominant eigenvalue, negative when unknown.
    double subdominant_modulus() const { return subdominant_modulus_; }

private:
    double subdominant_modulus_;
};

/// Linear system numerically singular.
class SingularSystemError : public Error {
public:
    using Error::Error;
};

/// Simulation aborted by the jump-explosion guard or an invalid sojourn law.
class SimulationAbort : public Error {
public:
    using Error::Error;
};

}  // namespace pdmp
