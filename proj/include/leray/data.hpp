#pragma once

#include "leray/common.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace leray::data {

enum class Kind { builtin, tabulated };

struct HemisphereSample {
    Vec3 xhat;  // unit vector, xhat(2) >= 0
    Vec3 a;     // a(xhat)
};

// -1-homogeneous initial field a(x) = a(xhat)/|x| on the closed upper half space.
// Immutable after construction.
class SelfSimilarDatum {
public:
    // Catalog: "zero", "swirl", "poloidal"; amplitude scales the closed form.
    static SelfSimilarDatum builtin(const std::string& name, double amplitude = 1.0);

    // Uniform latitude-longitude mesh: theta_i = i*(pi/2)/(nt-1), i < nt, and
    // phi_j = j*2pi/np, j < np (np even). Samples in row-major (theta, phi) order.
    static SelfSimilarDatum tabulated(int n_theta, int n_phi, std::vector<Vec3> values,
                                      int interpolation_order = 3);
    static SelfSimilarDatum load_csv(const std::string& path, int interpolation_order = 3);

    // Accepts a catalog name, "<eps>*<name>", or a CSV path.
    static SelfSimilarDatum from_spec(const std::string& spec);

    Kind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    double amplitude() const { return amplitude_; }
    int interpolation_order() const { return order_; }
    double c1_seminorm_estimate() const { return c1_; }
    std::vector<HemisphereSample> hemisphere_samples() const;

    // False only when a3 vanishes identically (exact for the catalog).
    bool has_normal_component() const { return normal_; }
    bool is_zero() const { return zero_; }

    Vec3 evaluate(const Vec3& x) const;       // checked
    Vec3 evaluate_raw(const Vec3& x) const;   // no argument checks; x3 >= 0, x != 0

    // Stable identifier of the field (used to key caches).
    std::string fingerprint() const;

private:
    Vec3 on_sphere(const Vec3& xhat) const;
    Vec3 table_lookup(double theta, double phi) const;
    void finish();

    Kind kind_ = Kind::builtin;
    std::string name_;
    double amplitude_ = 1.0;
    int order_ = 3;
    int nt_ = 0, np_ = 0;
    std::shared_ptr<const std::vector<Vec3>> table_;
    double c1_ = 0.0;
    bool normal_ = true;
    bool zero_ = false;
};

Vec3 evaluate_datum(const SelfSimilarDatum& d, const Vec3& x);

// Centered-difference divergence of the homogeneous extension at x.
double divergence_residual(const SelfSimilarDatum& d, const Vec3& x, double h);

// Sampled max(|a|, |grad a|) on the unit hemisphere.
double estimate_c1_seminorm(const SelfSimilarDatum& d);

struct ValidationReport {
    double max_divergence;  // relative to c1 estimate
    double max_boundary;    // max |a| on the equator
    bool ok;
};
ValidationReport check_datum(const SelfSimilarDatum& d, double tolerance);
// Throws ValidationError when check_datum fails.
void validate_datum(const SelfSimilarDatum& d, double tolerance);

}  // namespace leray::data
