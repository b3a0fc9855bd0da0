#pragma once

#include "leray/common.hpp"

#include <array>
#include <memory>
#include <vector>

namespace leray::kernels {

enum class VerticalRule { gauss, uniform };

struct QuadratureSpec {
    double radial_cutoff = 12.0;  // truncation radius for algebraically decaying integrals over R^2
    int points_per_dim = 48;
    VerticalRule vertical_rule = VerticalRule::gauss;
    double tolerance = 1e-6;      // relative

    void validate() const;
    // Same spec with points_per_dim scaled (used for the refinement estimate).
    QuadratureSpec coarser() const;
};

struct Estimate {
    double value = 0.0;
    double error = 0.0;
};

struct VecEstimate {
    Vec3 value = Vec3::Zero();
    double error = 0.0;
};

double heat_kernel(const Vec3& x, double t);
// multi-index (k1,k2,k3) with k1+k2+k3 <= 2
double heat_kernel_deriv(const Vec3& x, double t, const std::array<int, 3>& k);
double laplace_green(const Vec3& x);
Vec3 laplace_green_grad(const Vec3& x);

// Layer integral over the slab R^2 x [0, x3]:
//   I(x) = \int (z - x)/|z - x|^3  (d^alpha Gamma)(z - c, t) dz.
// The integrand is evaluated at points_per_dim and at half of it; the
// difference is the error estimate. Throws NumericalError when it exceeds the
// tolerance.
VecEstimate slab_layer(const Vec3& x, const Vec3& c, double t, const std::array<int, 3>& alpha,
                       const QuadratureSpec& q);

// G*_ij(x, y, t); i in {1,2,3}, j in {1,2}.
double gstar(int i, int j, const Vec3& x, const Vec3& y, double t, const QuadratureSpec& q);
Estimate gstar_estimate(int i, int j, const Vec3& x, const Vec3& y, double t,
                        const QuadratureSpec& q);

// C_i(x, t) = \int_{R^2 x [0,x3]} d3 Gamma(y, t) (y_i - x_i)/|y - x|^3 dy, i in {1,2,3}.
double ci_kernel(int i, const Vec3& x, double t, const QuadratureSpec& q);
VecEstimate ci_kernel_all(const Vec3& x, double t, const QuadratureSpec& q);
// (i, k) entry: d C_i / d x_k
Mat3 ci_kernel_grad(const Vec3& x, double t, const QuadratureSpec& q, double* error = nullptr);

// K_ij = -2 delta_ij d3 Gamma - (1/pi) d_j C_i, j in {1,2}.
double boundary_kernel_K(int i, int j, const Vec3& x, double t, const QuadratureSpec& q);

// C_i at the reference time t = 1 tabulated on (rho = |x'|, x3) with the
// far field expansion outside; C(x, s) = s^{-3/2} C(x/sqrt(s), 1).
class CiTable {
public:
    explicit CiTable(const QuadratureSpec& q, double extent = 16.0, double spacing = 0.125);
    Vec3 operator()(const Vec3& x, double s) const;
    Vec3 reference(const Vec3& xi) const;  // t = 1
    static Vec3 far_field(const Vec3& xi);
    double max_error() const { return max_error_; }

private:
    double lookup(const std::vector<double>& f, double rho, double z, bool odd) const;
    int n_;
    double h_, extent_;
    std::vector<double> c_rho_, c_3_;
    double max_error_ = 0.0;
};

// Shared instance per quadrature spec, built on first use.
std::shared_ptr<const CiTable> ci_table(const QuadratureSpec& q);

}  // namespace leray::kernels
