#include "leray/propagator.hpp"

#include "leray/parallel.hpp"
#include "leray/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>

namespace leray::propagator {

std::string route_name(Route r) { return r == Route::solonnikov ? "solonnikov" : "reflection"; }

namespace {

void require_points(const std::vector<Vec3>& pts) {
    for (const auto& x : pts)
        if (!(x(2) >= 0.0)) throw DomainError("evaluation points must satisfy x3 >= 0");
}

FieldFn zero_extended(const data::SelfSimilarDatum& d) {
    return [&d](const Vec3& om) -> Vec3 {
        if (om(2) < 0.0) return Vec3::Zero();
        return d.evaluate_raw(om);
    };
}


// psi(z) = div' U1(z*) at t = 1/2 on a box [-E, E]^2 x [0, Z], tricubic on
// a grid uniform in u = asinh(z): spacing ~0.2 at the origin, growing like
// |z| where psi is a slowly varying power law. Beyond |z'| = E a two-term law
// rho^{-2}, rho^{-4} along rays at fixed z3; above Z psi is Gaussian-small
// and dropped.
class PsiTable {
public:
    PsiTable(const data::SelfSimilarDatum& d, const QuadratureSpec& q, int jobs)
        : E_(10.0), Z_(6.0) {
        const double du = 0.2;
        m_ = int(std::ceil(std::asinh(E_) / du));
        hu_ = std::asinh(E_) / m_;
        n_ = 2 * m_ + 1;
        nz_ = int(std::ceil(std::asinh(Z_) / du)) + 1;
        hz_ = std::asinh(Z_) / (nz_ - 1);
        v_.assign(size_t(n_) * n_ * nz_, 0.0);
        const FieldFn f = zero_extended(d);
        std::vector<double> errs(v_.size(), 0.0);
        parallel_for(v_.size(), jobs, [&](size_t k) {
            const int i = int(k % n_), j = int((k / n_) % n_), l = int(k / (size_t(n_) * n_));
            const Vec3 zs(std::sinh((i - m_) * hu_), std::sinh((j - m_) * hu_), -std::sinh(l * hz_));
            const auto s = heat_convolve(f, Support::half, zs, 0.5, q, kGradient);
            v_[k] = s.grad(0, 0) + s.grad(1, 1);
            errs[k] = s.error;
        });
        for (double e : errs) max_error_ = std::max(max_error_, e);
        inner_ = std::sinh((m_ - 2) * hu_);
    }

    double operator()(const Vec3& z) const {
        if (z(2) > Z_ || z(2) < 0.0) return 0.0;
        if (std::abs(z(0)) <= inner_ && std::abs(z(1)) <= inner_) return interp(z(0), z(1), z(2));
        // two-term extrapolation along the ray through z' at this height
        const double rho = std::hypot(z(0), z(1));
        const double ra = inner_ - 2.0, rb = inner_;
        const double c = z(0) / rho, s = z(1) / rho;
        const double va = interp(ra * c, ra * s, z(2)), vb = interp(rb * c, rb * s, z(2));
        // v = A r^-2 + B r^-4
        const double det = std::pow(ra, -2) * std::pow(rb, -4) - std::pow(ra, -4) * std::pow(rb, -2);
        const double A = (va * std::pow(rb, -4) - vb * std::pow(ra, -4)) / det;
        const double B = (vb * std::pow(ra, -2) - va * std::pow(rb, -2)) / det;
        return A * std::pow(rho, -2) + B * std::pow(rho, -4);
    }
    double max_error() const { return max_error_; }

private:
    double interp(double x, double y, double z) const {
        double wx[4], wy[4], wz[4];
        const int i0 = quad::lagrange4(std::asinh(x) / hu_ + m_, n_, wx);
        const int j0 = quad::lagrange4(std::asinh(y) / hu_ + m_, n_, wy);
        const int l0 = quad::lagrange4(std::asinh(z) / hz_, nz_, wz);
        double acc = 0.0;
        for (int c = 0; c < 4; ++c)
            for (int b = 0; b < 4; ++b) {
                const size_t base = (size_t(l0 + c) * n_ + (j0 + b)) * n_ + i0;
                const double wbc = wy[b] * wz[c];
                for (int a = 0; a < 4; ++a) acc += wx[a] * wbc * v_[base + a];
            }
        return acc;
    }
    double E_, Z_, hu_ = 0.0, hz_ = 0.0, inner_ = 0.0;
    int m_ = 0, n_ = 0, nz_ = 0;
    std::vector<double> v_;
    double max_error_ = 0.0;
};

// \int_{R^2 x [0, x3]} (z - x)/|z - x|^3 psi(z) dz in spherical coordinates
// about x: the kernel cancels the Jacobian and rays end on the wall.
Vec3 slab_psi(const Vec3& x, const std::function<double(const Vec3&)>& psi, double R,
              int order) {
    Vec3 acc = Vec3::Zero();
    const double x3 = x(2);
    if (!(x3 > 0.0)) return acc;
    std::vector<double> tb{0.0};
    for (double rm = 2.0 * x3; rm < R; rm *= 2.0) tb.push_back(std::acos(x3 / rm));
    if (x3 < R) tb.push_back(std::acos(x3 / R));
    for (int k = 1; k <= 4; ++k) {
        const double b = tb.back() + (0.5 * M_PI - tb.back()) * k / 4.0;
        if (b > tb.back() + 1e-12) tb.push_back(b);
    }
    const auto qth = quad::composite(tb, order);
    const int nph = 8 * order;
    for (const auto& th : qth) {
        const double st = std::sin(th.x), ct = std::cos(th.x);
        const double len = ct * R > x3 ? x3 / ct : R;
        // unit panels near x, geometric beyond
        std::vector<double> rb{0.0};
        double r = 0.0, w = 0.5;
        while (r < len) {
            r = std::min(len, r + w);
            rb.push_back(r);
            if (r > 4.0) w *= 1.5;
        }
        const auto qr = quad::composite(rb, std::max(4, order - 2));
        for (int ip = 0; ip < nph; ++ip) {
            const double ph = 2.0 * M_PI * (ip + 0.5) / nph;
            const Vec3 om(st * std::cos(ph), st * std::sin(ph), -ct);
            const double wa = th.w * st * 2.0 * M_PI / nph;
            double line = 0.0;
            for (const auto& rr : qr) line += rr.w * psi(x + rr.x * om);
            acc += wa * line * om;
        }
    }
    return acc;
}

struct Correction {
    Vec3 value = Vec3::Zero();
    Mat3 grad = Mat3::Zero();
    Vec3 lap = Vec3::Zero();
    double error = 0.0;
};

// The psi table depends only on the datum and the quadrature, and costs far
// more than a batch of evaluation points; repeated calls in one process reuse
// the most recent few.
std::shared_ptr<const PsiTable> shared_psi(const data::SelfSimilarDatum& d, const QuadratureSpec& q,
                                           int jobs) {
    static std::mutex mu;
    static std::deque<std::pair<std::string, std::shared_ptr<const PsiTable>>> cache;
    char buf[64];
    std::snprintf(buf, sizeof buf, "|%d|%.17g", q.points_per_dim, q.tolerance);
    const std::string key = d.fingerprint() + buf;
    {
        std::lock_guard<std::mutex> lk(mu);
        for (const auto& [k, t] : cache)
            if (k == key) return t;
    }
    auto tab = std::make_shared<const PsiTable>(d, q, jobs);
    std::lock_guard<std::mutex> lk(mu);
    cache.emplace_back(key, tab);
    if (cache.size() > 4) cache.pop_front();
    return tab;
}

// -(1/pi) slab_psi and, on request, its derivatives by central differences
// (one-sided in x3 next to the wall).
Correction correction(const Vec3& x, double t, const PsiTable& tab, const QuadratureSpec& q,
                      int derivs) {
    const double sc = std::sqrt(2.0 * t);
    // psi at time t: (2t)^{-1} psi_{1/2}(z / sqrt(2t)); the slab integral of a
    // function of z/sc scales by sc, so C(x, t) = (2t)^{-1/2} C(x/sc, 1/2).
    const Vec3 xs = x / sc;
    const double R = std::max(2.0 * q.radial_cutoff, std::hypot(xs(0), xs(1)) + q.radial_cutoff);
    const int order = std::clamp(q.points_per_dim / 8, 4, 10);
    auto psi = [&tab](const Vec3& z) { return tab(z); };
    auto C = [&](const Vec3& y, int ord) -> Vec3 { return -slab_psi(y, psi, R, ord) / M_PI; };
    Correction out;
    out.value = C(xs, order);
    out.error = (C(xs, order - 2) - out.value).cwiseAbs().maxCoeff();
    if (derivs != kValue) {
        const double h = 0.02;
        Vec3 second = Vec3::Zero();
        for (int k = 0; k < 3; ++k) {
            Vec3 e = Vec3::Zero();
            e(k) = h;
            if (k < 2 || xs(2) >= 2.0 * h) {
                const Vec3 fp = C(xs + e, order), fm = C(xs - e, order);
                out.grad.col(k) = (fp - fm) / (2.0 * h);
                second += (fp - 2.0 * out.value + fm) / (h * h);
            } else {
                const Vec3 f1 = C(xs + e, order), f2 = C(xs + 2 * e, order), f3 = C(xs + 3 * e, order);
                out.grad.col(k) = (-3.0 * out.value + 4.0 * f1 - f2) / (2.0 * h);
                second += (2.0 * out.value - 5.0 * f1 + 4.0 * f2 - f3) / (h * h);
            }
        }
        out.lap = second;
    }
    out.value /= sc;
    out.error /= sc;
    out.grad /= sc * sc;
    out.lap /= sc * sc * sc;
    return out;
}

PropagatedField make_field(const std::vector<Vec3>& pts, Route r, int derivs) {
    PropagatedField f;
    f.points = pts;
    f.route = r;
    f.values.assign(pts.size(), Vec3::Zero());
    f.errors.assign(pts.size(), 0.0);
    if (derivs & kGradient) f.gradients.assign(pts.size(), Mat3::Zero());
    if (derivs & kLaplacian) f.laplacians.assign(pts.size(), Vec3::Zero());
    return f;
}

void finish(PropagatedField& f) {
    f.quadrature_error_estimate = 0.0;
    for (double e : f.errors) f.quadrature_error_estimate = std::max(f.quadrature_error_estimate, e);
}

}  // namespace

FieldFn reflect_extend(const data::SelfSimilarDatum& d) {
    return [d](const Vec3& x) -> Vec3 {
        if (x(2) >= 0.0) return d.evaluate(x);
        Vec3 a = d.evaluate(mirror(x));
        a(2) = -a(2);
        return a;
    };
}

PropagatedField heat_wholespace(const FieldFn& f, double t, const std::vector<Vec3>& points,
                                const QuadratureSpec& q, const Options& opt) {
    if (!(t > 0.0)) throw DomainError("time must be positive");
    auto out = make_field(points, Route::reflection, opt.derivs);
    parallel_for(points.size(), opt.jobs, [&](size_t i) {
        const auto s = heat_convolve(f, Support::whole, points[i], t, q, opt.derivs);
        out.values[i] = s.value;
        out.errors[i] = s.error;
        if (opt.derivs & kGradient) out.gradients[i] = s.grad;
        if (opt.derivs & kLaplacian) out.laplacians[i] = s.lap;
    });
    finish(out);
    return out;
}

PropagatedField propagate_solonnikov(const data::SelfSimilarDatum& d, double t,
                                     const std::vector<Vec3>& points, const QuadratureSpec& q,
                                     const Options& opt) {
    if (!(t > 0.0)) throw DomainError("time must be positive");
    require_points(points);
    q.validate();
    data::validate_datum(d, 1e-3);
    auto out = make_field(points, Route::solonnikov, opt.derivs);
    if (d.is_zero()) return out;
    const FieldFn f = zero_extended(d);
    std::shared_ptr<const PsiTable> psi;
    if (d.has_normal_component()) {
        QuadratureSpec qt = q;
        qt.tolerance = std::max(q.tolerance, 1e-6);
        psi = shared_psi(d, qt, opt.jobs);
    }
    const Vec3 eps(1.0, 1.0, -1.0);
    parallel_for(points.size(), opt.jobs, [&](size_t i) {
        const Vec3& x = points[i];
        if (x(2) == 0.0) {
            // U1(x) - U1(x*) = 0 and the slab is empty; gradients still needed
            if (opt.derivs == kValue) return;
        }
        const auto a = heat_convolve(f, Support::half, x, t, q, opt.derivs);
        const auto b = heat_convolve(f, Support::half, mirror(x), t, q, opt.derivs);
        out.values[i] = a.value - b.value;
        out.errors[i] = a.error + b.error;
        if (opt.derivs & kGradient) out.gradients[i] = a.grad - b.grad * eps.asDiagonal();
        if (opt.derivs & kLaplacian) out.laplacians[i] = a.lap - b.lap;
        if (psi) {
            const auto c = correction(x, t, *psi, q, opt.derivs);
            out.values[i] += c.value;
            out.errors[i] += c.error;
            if (opt.derivs & kGradient) out.gradients[i] += c.grad;
            if (opt.derivs & kLaplacian) out.laplacians[i] += c.lap;
        }
    });
    finish(out);
    return out;
}

// ---------------------------------------------------------------------------

struct BoundaryTrace::Tables {
    double E, h;
    int n;
    std::vector<double> v[3];  // u1, u2, div' u at tau = 1/2
};

BoundaryTrace BoundaryTrace::zero() { return BoundaryTrace(); }

BoundaryTrace BoundaryTrace::from_field(const FieldFn& abar, const QuadratureSpec& q,
                                        double extent, double spacing, int jobs) {
    if (!(extent > 4.0 * spacing) || !(spacing > 0.0))
        throw ValidationError("boundary trace: extent must exceed 4 spacings");
    auto tab = std::make_shared<Tables>();
    tab->E = extent;
    tab->h = spacing;
    tab->n = int(std::lround(2.0 * extent / spacing)) + 1;
    const size_t N = size_t(tab->n) * tab->n;
    for (auto& v : tab->v) v.assign(N, 0.0);
    std::vector<double> errs(N, 0.0);
    parallel_for(N, jobs, [&](size_t k) {
        const int i = int(k % tab->n), j = int(k / tab->n);
        const Vec3 z(-extent + i * spacing, -extent + j * spacing, 0.0);
        const auto s = heat_convolve(abar, Support::whole, z, 0.5, q, kGradient);
        tab->v[0][k] = s.value(0);
        tab->v[1][k] = s.value(1);
        tab->v[2][k] = s.grad(0, 0) + s.grad(1, 1);
        errs[k] = s.error;
    });
    BoundaryTrace b;
    b.tab_ = tab;
    double mx = 0.0, md = 0.0;
    for (int c = 0; c < 2; ++c)
        for (double v : tab->v[c]) mx = std::max(mx, std::abs(v));
    for (double v : tab->v[2]) md = std::max(md, std::abs(v));
    // Rounding-level tables count as zero, relative to the size of the field on
    // the unit sphere; div' u at quadrature-noise level (the swirl trace is
    // solenoidal in the plane) drops the C-part.
    double amax = 0.0;
    const int ns = 400;
    for (int k = 0; k < ns; ++k) {
        const double z = 1.0 - (2.0 * k + 1.0) / ns, r = std::sqrt(1.0 - z * z);
        const double ph = k * M_PI * (3.0 - std::sqrt(5.0));
        amax = std::max(amax, abar(Vec3(r * std::cos(ph), r * std::sin(ph), z)).norm());
    }
    b.zero_ = !(mx > 1e-12 * amax) && !(md > 1e-12 * amax);
    b.div_ = md > std::max(1e-12 * amax, q.tolerance * mx);
    for (double e : errs) b.max_error_ = std::max(b.max_error_, e);
    return b;
}

double BoundaryTrace::lookup(int comp, double a, double b) const {
    const auto& T = *tab_;
    double wx[4], wy[4];
    const int i0 = quad::lagrange4((a + T.E) / T.h, T.n, wx);
    const int j0 = quad::lagrange4((b + T.E) / T.h, T.n, wy);
    double acc = 0.0;
    for (int jb = 0; jb < 4; ++jb) {
        const double* row = T.v[comp].data() + size_t(j0 + jb) * T.n + i0;
        acc += wy[jb] * (wx[0] * row[0] + wx[1] * row[1] + wx[2] * row[2] + wx[3] * row[3]);
    }
    return acc;
}

// Far field along the ray through (a, b): A r^-p + B r^-(p+2) fitted to two
// table values.
double BoundaryTrace::far(int comp, double a, double b, double p) const {
    const auto& T = *tab_;
    const double inner = T.E - 2.0 * T.h;
    if (std::abs(a) <= inner && std::abs(b) <= inner) return lookup(comp, a, b);
    const double rho = std::hypot(a, b);
    const double ra = inner - 2.0, rb = inner;
    const double c = a / rho, s = b / rho;
    const double va = lookup(comp, ra * c, ra * s), vb = lookup(comp, rb * c, rb * s);
    const double q = p + 2.0;
    const double det = std::pow(ra, -p) * std::pow(rb, -q) - std::pow(ra, -q) * std::pow(rb, -p);
    const double A = (va * std::pow(rb, -q) - vb * std::pow(ra, -q)) / det;
    const double B = (vb * std::pow(ra, -p) - va * std::pow(rb, -p)) / det;
    return A * std::pow(rho, -p) + B * std::pow(rho, -q);
}

Vec3 BoundaryTrace::value(double z1, double z2, double tau) const {
    if (zero_) return Vec3::Zero();
    const double sc = std::sqrt(2.0 * tau);
    return Vec3(far(0, z1 / sc, z2 / sc, 2.0), far(1, z1 / sc, z2 / sc, 2.0), 0.0) / sc;
}

double BoundaryTrace::divergence(double z1, double z2, double tau) const {
    if (zero_) return 0.0;
    const double sc = std::sqrt(2.0 * tau);
    return far(2, z1 / sc, z2 / sc, 3.0) / (sc * sc);
}

namespace {

struct LayerLevel {
    int order;  // Gauss points per panel (radial and time)
    int nphi;
};

// Time integral for one boundary node z' at distance d from x.
//   DL_i = (x3/s) Gamma(x - z', s) u_i(z', t - s),  i < 3
//   CL   = -(1/pi) C(x - z', s) div' u(z', t - s)
// s in (0, t/2] via s = sigma^2, tau = t - s in (0, t/2] via tau = nu^2, each
// with panels halving toward 0 down to the local scale.
Vec3 time_integral(const Vec3& x, double z1, double z2, double t, const BoundaryTrace& tr,
                   const kernels::CiTable* ci, const quad::Rule& gl) {
    const Vec3 y(x(0) - z1, x(1) - z2, x(2));
    const double d = y.norm();
    const double rz = std::hypot(z1, z2);
    const double top = std::sqrt(0.5 * t);
    Vec3 acc = Vec3::Zero();
    auto integrand = [&](double s, double tau, double w) {
        const double g = std::exp(-d * d / (4.0 * s)) / std::pow(4.0 * M_PI * s, 1.5);
        const Vec3 u = tr.value(z1, z2, tau);
        acc(0) += w * x(2) / s * g * u(0);
        acc(1) += w * x(2) / s * g * u(1);
        if (ci) acc -= (w / M_PI) * (*ci)(y, s) * tr.divergence(z1, z2, tau);
    };
    auto panels = [&](double scale, auto&& body) {
        int K = int(std::ceil(std::log2(top / std::max(0.1 * scale, 1e-12))));
        K = std::clamp(K, 1, 40);
        double b = top;
        for (int k = 0; k <= K; ++k) {
            const double a = k == K ? 0.0 : 0.5 * b;
            for (size_t m = 0; m < gl.x.size(); ++m) {
                const double v = 0.5 * (a + b) + 0.5 * (b - a) * gl.x[m];
                body(v, 0.5 * (b - a) * gl.w[m]);
            }
            b = a;
        }
    };
    panels(d, [&](double sg, double w) { integrand(sg * sg, t - sg * sg, 2.0 * sg * w); });
    panels(rz, [&](double nu, double w) { integrand(t - nu * nu, nu * nu, 2.0 * nu * w); });
    return acc;
}

Vec3 layer_level(const Vec3& x, double t, const BoundaryTrace& tr, const kernels::CiTable* ci,
                 const QuadratureSpec& q, const LayerLevel& L) {
    const auto& gl = quad::gauss_legendre(L.order);
    const double rx = std::hypot(x(0), x(1));
    const double Rz = rx + 2.0 * q.radial_cutoff * std::sqrt(2.0 * t);
    const double rmin = 1e-4 * std::sqrt(t);
    Vec3 acc = Vec3::Zero();

    auto polar = [&](double cx, double cy, double r0, double r1, double cut, bool origin_part,
                     double rho0) {
        const auto qr = quad::composite(quad::geometric_breaks(r0, r1), L.order);
        for (const auto& rr : qr) {
            for (int ip = 0; ip < L.nphi; ++ip) {
                const double ph = 2.0 * M_PI * (ip + 0.5) / L.nphi;
                const double z1 = cx + rr.x * std::cos(ph), z2 = cy + rr.x * std::sin(ph);
                double w = rr.w * rr.x * 2.0 * M_PI / L.nphi;
                if (cut > 0.0) {
                    const double chi = quad::cutoff(std::hypot(z1, z2), rho0, 2.0 * rho0);
                    w *= origin_part ? chi : 1.0 - chi;
                }
                if (w == 0.0) continue;
                acc += w * time_integral(x, z1, z2, t, tr, ci, gl);
            }
        }
    };
    if (rx <= 2.0 * x(2)) {
        polar(0.0, 0.0, rmin, Rz, 0.0, true, 0.0);
    } else {
        const double rho0 = rx / 3.0;
        polar(0.0, 0.0, rmin, 2.0 * rho0, 1.0, true, rho0);
        polar(x(0), x(1), x(2) / 8.0, Rz, 1.0, false, rho0);
    }
    return acc;
}

}  // namespace

PropagatedField boundary_layer_w(const BoundaryTrace& trace, double t,
                                 const std::vector<Vec3>& points, const QuadratureSpec& q,
                                 const Options& opt) {
    if (!(t > 0.0)) throw DomainError("time must be positive");
    require_points(points);
    q.validate();
    if (opt.derivs != kValue)
        throw std::invalid_argument("boundary_layer_w: derivatives are not available");
    auto out = make_field(points, Route::reflection, kValue);
    if (trace.is_zero()) return out;
    std::shared_ptr<const kernels::CiTable> ci;
    if (trace.has_divergence()) ci = kernels::ci_table(q);
    const LayerLevel fine{std::clamp(q.points_per_dim / 8 + 2, 4, 12),
                          std::max(16, q.points_per_dim)};
    const LayerLevel coarse{fine.order - 1, std::max(12, 3 * fine.nphi / 4)};
    parallel_for(points.size(), opt.jobs, [&](size_t i) {
        const Vec3& x = points[i];
        if (x(2) == 0.0) {
            out.values[i] = trace.value(x(0), x(1), t);  // jump relation
            return;
        }
        const Vec3 a = layer_level(x, t, trace, ci.get(), q, fine);
        const Vec3 b = layer_level(x, t, trace, ci.get(), q, coarse);
        out.values[i] = a;
        out.errors[i] = (a - b).cwiseAbs().maxCoeff();
    });
    finish(out);
    return out;
}

PropagatedField propagate_reflection(const data::SelfSimilarDatum& d, double t,
                                     const std::vector<Vec3>& points, const QuadratureSpec& q,
                                     const Options& opt) {
    if (!(t > 0.0)) throw DomainError("time must be positive");
    require_points(points);
    q.validate();
    data::validate_datum(d, 1e-3);
    if (opt.derivs != kValue)
        throw std::invalid_argument("propagate_reflection: derivatives are not available");
    auto out = make_field(points, Route::reflection, kValue);
    if (d.is_zero()) return out;
    const FieldFn abar = reflect_extend(d);
    const auto u = heat_wholespace(abar, t, points, q, opt);
    const auto trace = BoundaryTrace::from_field(abar, q, 10.0, 0.2, opt.jobs);
    const auto w = boundary_layer_w(trace, t, points, q, opt);
    for (size_t i = 0; i < points.size(); ++i) {
        out.values[i] = points[i](2) == 0.0 ? Vec3::Zero() : Vec3(u.values[i] - w.values[i]);
        out.errors[i] = u.errors[i] + w.errors[i] + trace.max_error();
    }
    finish(out);
    return out;
}

void write_csv(const PropagatedField& f, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    os << "x1,x2,x3,v1,v2,v3,err_est\n";
    char buf[256];
    for (size_t i = 0; i < f.points.size(); ++i) {
        const auto& x = f.points[i];
        const auto& v = f.values[i];
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.12g,%.12g,%.12g,%.3g\n", x(0), x(1),
                      x(2), v(0), v(1), v(2), f.errors[i]);
        os << buf;
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace leray::propagator
