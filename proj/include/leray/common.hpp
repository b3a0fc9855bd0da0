#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace leray {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// x* = (x', -x3)
inline Vec3 mirror(const Vec3& x) { return {x(0), x(1), -x(2)}; }

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Quadrature or linear-solver failure; carries the achieved estimate.
struct NumericalError : std::runtime_error {
    double estimate;
    NumericalError(const std::string& what, double est)
        : std::runtime_error(what), estimate(est) {}
};

struct ContinuationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace leray
