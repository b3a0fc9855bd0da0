#pragma once

#include "leray/data.hpp"
#include "leray/kernels.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace leray::propagator {

using kernels::QuadratureSpec;
using FieldFn = std::function<Vec3(const Vec3&)>;

enum class Route { solonnikov, reflection };
std::string route_name(Route r);

// Which part of space the convolved field lives on; on `half` it is
// extended by zero below x3 = 0.
enum class Support { half, whole };

enum Derivs : int { kValue = 0, kGradient = 1, kLaplacian = 2 };

struct HeatSample {
    Vec3 value = Vec3::Zero();
    Mat3 grad = Mat3::Zero();  // (i, k) = d_k u_i
    Vec3 lap = Vec3::Zero();
    double error = 0.0;
};

// \int Gamma(x - y, t) f(y) dy for f with at most a |y|^{-1} singularity at
// the origin and smooth elsewhere (up to a kink across y3 = 0).
HeatSample heat_convolve(const FieldFn& f, Support support, const Vec3& x, double t,
                         const QuadratureSpec& q, int derivs = kValue);

struct PropagatedField {
    std::vector<Vec3> points;
    std::vector<Vec3> values;
    std::vector<Mat3> gradients;   // filled when requested
    std::vector<Vec3> laplacians;  // filled when requested
    std::vector<double> errors;
    Route route = Route::solonnikov;
    double quadrature_error_estimate = 0.0;
};

struct Options {
    int derivs = kValue;
    int jobs = 1;
};

// Extension a_j(x*) eps_j to all of R^3 (eps = (1, 1, -1)).
FieldFn reflect_extend(const data::SelfSimilarDatum& d);

// Whole-space heat flow of an arbitrary field.
PropagatedField heat_wholespace(const FieldFn& f, double t, const std::vector<Vec3>& points,
                                const QuadratureSpec& q, const Options& opt = {});

// U0 = U1(x) - U1(x*) - (1/pi) \int_{R^2 x [0,x3]} (z-x)/|z-x|^3 psi(z) dz,
// psi(z) = div' U1(z*), U1 the heat flow of the zero-extended datum.
PropagatedField propagate_solonnikov(const data::SelfSimilarDatum& d, double t,
                                     const std::vector<Vec3>& points, const QuadratureSpec& q,
                                     const Options& opt = {});

// Boundary values u(z', 0, tau) of the heat flow of a -1-homogeneous
// whole-space field, tabulated once at tau = 1/2 and rescaled:
//   u(z', 0, tau) = (2 tau)^{-1/2} T(z'/sqrt(2 tau)).
class BoundaryTrace {
public:
    static BoundaryTrace from_field(const FieldFn& abar, const QuadratureSpec& q,
                                    double extent = 10.0, double spacing = 0.25, int jobs = 1);
    static BoundaryTrace zero();

    Vec3 value(double z1, double z2, double tau) const;
    double divergence(double z1, double z2, double tau) const;  // d1 u1 + d2 u2
    bool is_zero() const { return zero_; }
    // False when div' u vanishes to rounding (then the C-part of the layer drops).
    bool has_divergence() const { return div_; }
    double max_error() const { return max_error_; }

private:
    struct Tables;
    double lookup(int comp, double a, double b) const;
    double far(int comp, double a, double b, double p) const;
    std::shared_ptr<const Tables> tab_;
    bool zero_ = true;
    bool div_ = false;
    double max_error_ = 0.0;
};

// w_i = sum_j \int_0^t \int_Sigma K_ij(x - z', s) u_j(z', 0, t - s) dz' ds.
PropagatedField boundary_layer_w(const BoundaryTrace& trace, double t,
                                 const std::vector<Vec3>& points, const QuadratureSpec& q,
                                 const Options& opt = {});

// U0 = u - w with u the heat flow of the reflected datum.
PropagatedField propagate_reflection(const data::SelfSimilarDatum& d, double t,
                                     const std::vector<Vec3>& points, const QuadratureSpec& q,
                                     const Options& opt = {});

void write_csv(const PropagatedField& f, const std::string& path);

// ---------------------------------------------------------------------------
// The profile U0 = U0(., 1/2) with gradient and Laplacian, tabulated for the
// solver on a grid uniform in asinh of each coordinate over
// [-E, E]^2 x [0, E] and interpolated tricubically.

struct ProfileSample {
    Vec3 value = Vec3::Zero();
    Mat3 grad = Mat3::Zero();  // (i, k) = d_k U_i
    Vec3 lap = Vec3::Zero();
    // lap U + U + x.grad U, formed at the nodes before interpolation (it is a
    // pure pressure gradient, zero for the swirl, and small next to its terms)
    Vec3 linear = Vec3::Zero();
};

class ProfileTable {
public:
    static ProfileTable build(const data::SelfSimilarDatum& d, double extent,
                              const QuadratureSpec& q, int jobs = 1, double du = 0.15);
    // Reuses <dir>/profile_<hash>.bin when its key matches, else builds and stores it.
    static ProfileTable cached(const data::SelfSimilarDatum& d, double extent,
                               const QuadratureSpec& q, const std::string& dir, int jobs = 1,
                               double du = 0.15);
    static ProfileTable load(const std::string& path);
    void save(const std::string& path) const;

    static ProfileTable zero(double extent);
    // The table of the datum scaled by c (the profile is linear in the datum).
    ProfileTable scaled(double c) const;

    // x3 >= 0 and x inside the box, else DomainError.
    ProfileSample operator()(const Vec3& x) const;
    double extent() const { return E_; }
    double max_error() const { return max_error_; }
    const std::string& key() const { return key_; }
    bool is_zero() const { return zero_; }

private:
    static std::string make_key(const data::SelfSimilarDatum& d, double extent,
                                const QuadratureSpec& q, double du);
    std::string key_;
    double E_ = 0.0, hu_ = 0.0, hz_ = 0.0, max_error_ = 0.0;
    int m_ = 0, n_ = 0, nz_ = 0;
    bool zero_ = true;
    std::vector<double> v_;  // per node: value, grad (row-major), lap, linear
};

// ---------------------------------------------------------------------------
// Log-log decay fits along rays from the origin.

// Omega_- = {1 + x3 > |x'|}, Omega_+ its complement in the half space.
enum class Region { minus, plus };
std::string region_name(Region r);
Region region_of(const Vec3& x);

struct RaySamples {
    std::string name;
    Region region = Region::minus;
    Vec3 direction = Vec3::UnitZ();
    std::vector<double> s;   // distances along the ray
    PropagatedField field;   // values and gradients at s * direction
};

// n points spaced geometrically in [s0, s1] along dir (normalized).
std::vector<Vec3> ray_points(const Vec3& dir, double s0, double s1, int n,
                             std::vector<double>* s = nullptr);

struct DecayFit {
    std::string ray, region, quantity;
    double slope = 0.0, target_slope = 0.0, tolerance = 0.0;
    double s_min = 0.0, s_max = 0.0;
    bool fitted = false;       // false when rejected (range or zero data)
    bool pass = false;         // |slope - target_slope| <= tolerance
    bool within_bound = false; // slope <= target_slope + tolerance
    std::string note;
};

struct DecayReport {
    std::vector<DecayFit> fits;
    bool trivial = false;  // identically zero field: no decay fit possible
    bool pass = false;
    double delta = 0.1;
    std::string to_json() const;
};

// Least-squares slope of log y against log s. Rejects fewer than one decade
// of s and non-positive y.
struct SlopeFit {
    double slope = 0.0;
    bool ok = false;
    std::string note;
};
SlopeFit fit_slope(const std::vector<double>& s, const std::vector<double>& y);

// Fits |U|, |grad U| and |U + x.grad U| on every ray. Gradients are required.
DecayReport decay_report(const std::vector<RaySamples>& rays, double delta = 0.1);

}  // namespace leray::propagator
