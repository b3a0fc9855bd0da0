#pragma once

#include "leray/leray_solver.hpp"
#include "leray/propagator.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace leray::verify {

using solver::Background;
using solver::GridPtr;
using solver::VectorField;

// ---------------------------------------------------------------------------
// Assumption on U0: finite L6 norm of U0, L2 norm of grad U0, and a bound on
// |int F0 . eta| over divergence-free eta with zero trace and unit H1 norm.

struct Assumption31Options {
    std::vector<double> radii{4.0, 6.0, 8.0};  // truncation radii, at least two
    // Decay slopes of |U0| and |grad U0| with their tolerances; the tails
    // beyond the last radius use slope + tolerance (the slower decay).
    std::optional<double> value_slope, grad_slope;
    double value_tolerance = 0.15, grad_tolerance = 0.3;
    int trial_count = 20;
    std::uint64_t seed = 20240611;
};

struct Assumption31 {
    std::vector<double> radii;
    std::vector<double> l6_truncated;      // int_{|x|<R} |U0|^6
    std::vector<double> l2grad_truncated;  // int_{|x|<R} |grad U0|^2
    double l6_tail = 0.0, l2grad_tail = 0.0;
    double l6_norm_U0 = 0.0, l2_norm_gradU0 = 0.0;  // truncated + tail, as norms
    std::vector<double> l6_extrapolated;   // truncated + tail bound, per radius
    double l6_change = 0.0;                // relative change of the truncated integral over the last two radii
    double l6_extrapolated_change = 0.0;   // the same for the extrapolated one
    double f0_weak_bound = 0.0;            // sup |int F0 . eta| / ||eta||_H1 over trial_count fields
    double f0_weak_bound_doubled = 0.0;    // the same over 2 trial_count fields
    double weak_bound_change = 0.0;        // relative change under doubling the trials
    // |grad w| for the discrete Stokes solution w with force F0: the exact
    // supremum of |int F0 . eta| / |grad eta|, so no trial field can exceed it
    double f0_dual_bound = 0.0;
    double advective_bound = 0.0;          // sup |int (eta.grad U0) . eta| / ||eta||_H1^2
    int trial_count = 0;
    std::uint64_t seed = 0;
    bool conclusive = false;               // tails bounded
    bool pass = false;  // tails bounded, extrapolated L6 stable to 5%, weak bound to 20%
    std::string note;
};

// U0 from its profile table; the weak bound uses F0 and U0 on the grid of bg.
Assumption31 assumption31_check(const propagator::ProfileTable& u0, const Background& bg,
                                const Assumption31Options& opt = {});

// Divergence-free (exactly, discretely) field with zero trace: the discrete
// curl of a sum of smooth compactly supported random potentials. Needs R/h >= 9.
VectorField random_trial_field(GridPtr g, std::uint64_t seed, int bumps = 64);

// |J^2 + (lambda/2) int |V|^2 - lambda int (F0 - V.grad U0) . V| / max(J^2, 1e-12),
// J^2 = int |grad V|^2, all by the solver's discrete quadrature.
double energy_identity_residual(const VectorField& v, double lambda, const Background& bg,
                                const VectorField& f0);

// ---------------------------------------------------------------------------
// Self-similar reconstruction u(x, t) = (2t)^{-1/2} U(x / sqrt(2t)).

// A profile on its domain; throws DomainError outside it.
using ProfileFn = std::function<Vec3(const Vec3&)>;

// U0 + V on the half ball of V's grid (V alone when u0 is null).
ProfileFn solved_profile(const propagator::ProfileTable* u0, const VectorField& v);

Vec3 reconstruct(const ProfileFn& U, double t, const Vec3& x);

struct ScalingIdentity {
    int points = 0;
    int checked = 0;            // points whose images lie in the domain
    double max_relative = 0.0;  // max |2 u(2x, 4t) - u(x, t)| / max |u(x, t)|
    double tolerance = 1e-12;
    bool pass = false;
};
// Random t in [1/8, 1/2] and x with x / sqrt(2t) inside the half ball of the given radius.
ScalingIdentity scaling_identity_check(const ProfileFn& U, double radius, int points, std::uint64_t seed);

struct NormScaling {
    std::vector<double> times, l2, grad_l2;  // accepted times and norms of v(t)
    std::vector<double> rejected;
    double l2_exponent = 0.0, grad_exponent = 0.0;
    double tolerance = 0.02;
    bool vacuous = false;  // V = 0
    bool pass = false;
};

// Norms of v(t) = (2t)^{-1/2} V(x / sqrt(2t)) by midpoint quadrature on a
// fixed physical lattice of spacing `spacing` (default: a quarter of V's grid
// spacing), gradients from interpolate_gradient(). A time whose
// support radius sqrt(2t) R exceeds observation_radius is rejected.
NormScaling norm_scaling_check(const VectorField& v, const std::vector<double>& times,
                               double spacing = 0.0, double observation_radius = 0.0);

struct BackgroundBound {
    std::vector<double> times;
    std::vector<double> ratio;  // max over samples of |u0(x, t)| (sqrt t + |x|)
    double spread = 0.0;        // max/min - 1 over the times
    std::vector<double> scaled_ratio;  // the same at (2x, 4t)
    double scaling_mismatch = 0.0;
    bool pass = false;
};
// The ratio depends on x / sqrt(t) only, so its maximum is stable in t when
// the samples span many scales: geometric radii in [r0, r1] on a few rays.
std::vector<Vec3> bound_samples(double r0 = 0.05, double r1 = 40.0, int per_ray = 30);
BackgroundBound background_bound_check(const data::SelfSimilarDatum& d, const std::vector<Vec3>& samples,
                                       const std::vector<double>& times,
                                       const propagator::QuadratureSpec& q, int jobs = 1);

// ---------------------------------------------------------------------------

struct EnergyEntry {
    double lambda = 0.0, radius = 0.0, spacing = 0.0, residual = 0.0;
};

struct DiagnosticsReport {
    std::uint64_t seed = 0;
    std::optional<Assumption31> assumption31;
    std::vector<EnergyEntry> energy_identity_residuals;
    double energy_tolerance = 0.05;
    std::optional<propagator::DecayReport> decay;
    std::optional<NormScaling> norm_scaling;
    std::optional<ScalingIdentity> scaling_identity;
    std::optional<BackgroundBound> background_bound;
    bool overall_pass = false;

    // Sets overall_pass from the components present.
    void finalize();
    // "schema": "verify-v1"; keys in a fixed order.
    std::string to_json() const;
};

}  // namespace leray::verify
