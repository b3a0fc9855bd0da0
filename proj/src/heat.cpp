#include "leray/propagator.hpp"
#include "leray/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace leray::propagator {

namespace {

struct Acc {
    Vec3 v = Vec3::Zero();
    Mat3 g = Mat3::Zero();
    Vec3 l = Vec3::Zero();
    double mag = 0.0;
    double fmax = 0.0;

    Acc& operator-=(const Acc& o) {
        v -= o.v;
        g -= o.g;
        l -= o.l;
        return *this;
    }
};

// Radial moments M_k = \int_0^inf r^k Gamma(x - r om, t) dr, k = 1..3, in
// closed form; p = x.om.
struct Moments {
    double m1, m2, m3;
};

Moments radial_moments(double x2, double p, double t) {
    const double sq = std::sqrt(t);
    const double c0 = 1.0 / std::pow(4.0 * M_PI * t, 1.5);
    const double perp = std::max(x2 - p * p, 0.0);
    const double ep = std::exp(-perp / (4.0 * t));  // exp(-q_perp^2 / 4t)
    const double ex = std::exp(-x2 / (4.0 * t));    // = ep * exp(-p^2 / 4t)
    // J_m = \int_{-p}^inf s^m exp(-s^2/4t) ds, pre-multiplied by ep
    const double j0 = std::sqrt(M_PI) * sq * std::erfc(-p / (2.0 * sq)) * ep;
    const double j1 = 2.0 * t * ex;
    const double j2 = -2.0 * t * p * ex + 2.0 * t * j0;
    const double j3 = 2.0 * t * p * p * ex + 4.0 * t * j1;
    Moments m;
    m.m1 = c0 * (p * j0 + j1);
    m.m2 = c0 * (p * p * j0 + 2.0 * p * j1 + j2);
    m.m3 = c0 * (p * p * p * j0 + 3.0 * p * p * j1 + 3.0 * p * j2 + j3);
    return m;
}

// Breaks on [lo, hi]: uniform ones plus a graded cluster about c with scale s.
std::vector<double> graded(double lo, double hi, double c, double s, int uniform) {
    std::vector<double> br;
    for (int i = 0; i <= uniform; ++i) br.push_back(lo + (hi - lo) * i / uniform);
    if (s > 0.0)
        for (double k : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0}) {
            for (double sg : {-1.0, 1.0}) {
                const double b = c + sg * k * s;
                if (b > lo && b < hi) br.push_back(b);
            }
        }
    std::sort(br.begin(), br.end());
    std::vector<double> out;
    for (double b : br)
        if (out.empty() || b - out.back() > 1e-12) out.push_back(b);
    out.back() = hi;
    return out;
}

// The field is -1-homogeneous, so \int Gamma(x-y) f(y) dy = \int_S2 f(om) M_1 dom.
// Polar angles about e3 keep the kink of f across the plane on a panel
// edge; panels are graded about the direction of x, where M_k concentrates
// with angular width ~ 2 sqrt(t)/|x|.
Acc heat_level(const FieldFn& f, Support support, const Vec3& x, double t, int derivs,
               int order) {
    Acc acc;
    const double x2 = x.squaredNorm(), rx = std::sqrt(x2);
    const double sig = rx > 0.0 ? 2.0 * std::sqrt(t) / rx : 1e300;
    const bool focused = sig < 0.5;
    const double thx = focused ? std::acos(std::clamp(x(2) / rx, -1.0, 1.0)) : 0.0;
    const double phx = focused ? std::atan2(x(1), x(0)) : 0.0;
    const double hi = support == Support::whole ? M_PI : 0.5 * M_PI;

    auto tb = graded(0.0, hi, thx, focused ? sig : 0.0, support == Support::whole ? 8 : 4);
    if (support == Support::whole &&
        std::find_if(tb.begin(), tb.end(), [](double b) { return std::abs(b - 0.5 * M_PI) < 1e-12; }) ==
            tb.end()) {
        tb.push_back(0.5 * M_PI);
        std::sort(tb.begin(), tb.end());
    }
    const auto qth = quad::composite(tb, order);

    // azimuthal panels; graded about phx when x is away from the axis
    const double sphi = focused ? sig / std::max(std::sin(thx), sig) : 0.0;
    std::vector<double> pb;
    if (focused && sphi < 0.5) {
        // work on [phx - pi, phx + pi] so the cluster sits in the middle
        pb = graded(phx - M_PI, phx + M_PI, phx, sphi, 8);
    } else {
        pb = graded(-M_PI, M_PI, 0.0, 0.0, 8);
    }
    const auto qph = quad::composite(pb, order);
    std::vector<double> cph(qph.size()), sph(qph.size());
    for (size_t j = 0; j < qph.size(); ++j) {
        cph[j] = std::cos(qph[j].x);
        sph[j] = std::sin(qph[j].x);
    }

    for (const auto& th : qth) {
        const double st = std::sin(th.x), ct = std::cos(th.x);
        for (size_t j = 0; j < qph.size(); ++j) {
            const Vec3 om(st * cph[j], st * sph[j], ct);
            const double p = x.dot(om);
            const Moments m = radial_moments(x2, p, t);
            const double w = th.w * qph[j].w * st;
            if (m.m1 * w == 0.0 && m.m2 == 0.0) continue;
            const Vec3 F = f(om);
            const Vec3 wf = w * F;
            acc.v += wf * m.m1;
            acc.mag += std::abs(w * m.m1) * F.norm();
            acc.fmax = std::max(acc.fmax, F.norm());
            if (derivs & kGradient) acc.g += wf * ((om * m.m2 - x * m.m1) / (2.0 * t)).transpose();
            if (derivs & kLaplacian)
                acc.l += wf * ((x2 * m.m1 - 2.0 * p * m.m2 + m.m3) / (4.0 * t * t) - 1.5 * m.m1 / t);
        }
    }
    return acc;
}

int order_for(int n) { return std::clamp(n / 4 + 4, 8, 24); }

}  // namespace

HeatSample heat_convolve(const FieldFn& f, Support support, const Vec3& x, double t,
                         const QuadratureSpec& q, int derivs) {
    if (!(t > 0.0)) throw DomainError("heat_convolve: time must be positive");
    q.validate();
    const int m = order_for(q.points_per_dim);
    const Acc fine = heat_level(f, support, x, t, derivs, m);
    Acc diff = heat_level(f, support, x, t, derivs, m - 2);
    diff -= fine;
    HeatSample s;
    s.value = fine.v;
    s.grad = fine.g;
    s.lap = fine.l;
    s.error = diff.v.cwiseAbs().maxCoeff();
    const double scale = std::max(fine.v.cwiseAbs().maxCoeff(), 1e-3 * fine.mag);
    // absolute floor: the size the flow of a field of this amplitude has at x
    const double floor = 1e-10 * fine.fmax / std::max(x.norm(), std::sqrt(t));
    if (s.error > q.tolerance * scale && s.error > 1e-13 * fine.mag && s.error > floor) {
        std::ostringstream os;
        os << "heat convolution did not converge at x=(" << x.transpose()
           << "): refinement difference " << s.error << " vs scale " << scale;
        throw NumericalError(os.str(), s.error);
    }
    return s;
}

}  // namespace leray::propagator
