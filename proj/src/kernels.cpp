#include "leray/kernels.hpp"

#include "leray/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace leray::kernels {

namespace {

constexpr double kGaussCut = 23.0;  // ln(1e10): Gaussian tails below 1e-10 are dropped

void require_time(double t) {
    if (!(t > 0.0)) throw DomainError("time must be positive");
}

// d^k/ds^k of the 1D heat kernel (4 pi t)^{-1/2} exp(-s^2/4t), k <= 2
inline double g1d(double s, double t, int k) {
    const double g = std::exp(-s * s / (4.0 * t)) / std::sqrt(4.0 * M_PI * t);
    if (k == 0) return g;
    if (k == 1) return -s / (2.0 * t) * g;
    return (s * s / (4.0 * t * t) - 1.0 / (2.0 * t)) * g;
}

inline double dgamma(const Vec3& z, double t, const std::array<int, 3>& a) {
    return g1d(z(0), t, a[0]) * g1d(z(1), t, a[1]) * g1d(z(2), t, a[2]);
}

int coarse_points(int n) { return std::max(4, (n - std::max(8, n / 4)) / 4 * 4); }

struct LayerSum {
    Vec3 value = Vec3::Zero();
    double magnitude = 0.0;  // sum of |weight * integrand|
};

// One resolution level of the slab integral.
LayerSum slab_level(const Vec3& x, const Vec3& c, double t, const std::array<int, 3>& alpha,
                    int n, VerticalRule vrule) {
    LayerSum out;
    const double sq = std::sqrt(t);
    const double Lg = 2.0 * sq * std::sqrt(kGaussCut);
    const double rho = sq;
    const double zlo = std::max(0.0, c(2) - Lg), zhi = std::min(x(2), c(2) + Lg);
    if (!(zhi > zlo)) return out;

    const int order = std::clamp(n / 4 + 2, 4, 14);
    const int npan = std::max(2, n / 8 + 1);

    // far part: (1 - chi) k g on the Gaussian box
    {
        auto b1 = quad::panel_breaks(c(0) - Lg, c(0) + Lg, npan, {x(0)}, rho);
        auto b2 = quad::panel_breaks(c(1) - Lg, c(1) + Lg, npan, {x(1)}, rho);
        const int nv = std::max(1, int(std::ceil(npan * (zhi - zlo) / (2.0 * Lg))));
        auto b3 = quad::panel_breaks(zlo, zhi, nv, {x(2)}, rho);
        const auto q1 = quad::composite(b1, order);
        const auto q2 = quad::composite(b2, order);
        std::vector<quad::Node> q3;
        if (vrule == VerticalRule::gauss) {
            q3 = quad::composite(b3, order);
        } else {
            const int m = int(order * (b3.size() - 1));
            q3 = quad::midpoint(zlo, zhi, m);
        }
        for (const auto& n3 : q3) {
            const double w3 = n3.w;
            const double g3 = g1d(n3.x - c(2), t, alpha[2]);
            const double d3 = n3.x - x(2);
            for (const auto& n2 : q2) {
                const double g23 = g3 * g1d(n2.x - c(1), t, alpha[1]) * w3 * n2.w;
                const double d2 = n2.x - x(1);
                for (const auto& n1 : q1) {
                    const double d1 = n1.x - x(0);
                    const double r2 = d1 * d1 + d2 * d2 + d3 * d3;
                    const double r = std::sqrt(r2);
                    const double chi = quad::cutoff(r, rho, 2.0 * rho);
                    if (chi >= 1.0) continue;
                    const double f = g23 * g1d(n1.x - c(0), t, alpha[0]) * n1.w * (1.0 - chi) /
                                     (r2 * r);
                    out.value += f * Vec3(d1, d2, d3);
                    out.magnitude += std::abs(f) * r;
                }
            }
        }
    }

    // near part: chi k g in spherical coordinates about x (lower hemisphere)
    Vec3 lo(c(0) - Lg, c(1) - Lg, zlo), hi(c(0) + Lg, c(1) + Lg, zhi);
    const Vec3 clamped = x.cwiseMax(lo).cwiseMin(hi);
    if ((clamped - x).norm() < 2.0 * rho) {
        const double R = 2.0 * rho;
        // graded so that the ray length to the wall doubles per panel
        std::vector<double> tb{0.0};
        for (double rm = 2.0 * x(2); rm < R; rm *= 2.0) {
            if (rm > rho && rm / 2.0 < rho) tb.push_back(std::acos(x(2) / rho));
            tb.push_back(std::acos(x(2) / rm));
        }
        if (x(2) < R) tb.push_back(std::acos(x(2) / R));
        tb.push_back(0.5 * M_PI);
        const auto qth = quad::composite(tb, std::max(8, n / 2));
        const int nphi = std::max(12, n);
        for (const auto& th : qth) {
            const double ct = std::cos(th.x), st = std::sin(th.x);
            const double rmax = (ct * R > x(2)) ? x(2) / ct : R;
            std::vector<double> rb{0.0};
            if (rmax > rho) rb.push_back(rho);
            rb.push_back(rmax);
            const auto qr = quad::composite(rb, std::max(6, n / 4 + 2));
            for (int ip = 0; ip < nphi; ++ip) {
                const double ph = 2.0 * M_PI * (ip + 0.5) / nphi;
                const Vec3 om(st * std::cos(ph), st * std::sin(ph), -ct);
                const double wa = th.w * st * 2.0 * M_PI / nphi;
                for (const auto& rr : qr) {
                    const double chi = quad::cutoff(rr.x, rho, 2.0 * rho);
                    if (chi <= 0.0) continue;
                    const Vec3 z = x + rr.x * om;
                    const double f = wa * rr.w * chi * dgamma(z - c, t, alpha);
                    out.value += f * om;
                    out.magnitude += std::abs(f);
                }
            }
        }
    }
    return out;
}

}  // namespace

void QuadratureSpec::validate() const {
    if (!(radial_cutoff > 0.0)) throw ValidationError("quadrature: radial_cutoff must be positive");
    if (points_per_dim < 4) throw ValidationError("quadrature: points_per_dim must be >= 4");
    if (!(tolerance > 0.0 && tolerance < 0.1))
        throw ValidationError("quadrature: tolerance must lie in (0, 0.1)");
}

QuadratureSpec QuadratureSpec::coarser() const {
    QuadratureSpec q = *this;
    q.points_per_dim = coarse_points(points_per_dim);
    return q;
}

double heat_kernel(const Vec3& x, double t) {
    require_time(t);
    return std::exp(-x.squaredNorm() / (4.0 * t)) / std::pow(4.0 * M_PI * t, 1.5);
}

double heat_kernel_deriv(const Vec3& x, double t, const std::array<int, 3>& k) {
    require_time(t);
    if (k[0] < 0 || k[1] < 0 || k[2] < 0 || k[0] + k[1] + k[2] > 2)
        throw std::invalid_argument("heat_kernel_deriv: derivative order above 2 is unsupported");
    return dgamma(x, t, k);
}

double laplace_green(const Vec3& x) {
    const double r = x.norm();
    if (!(r > 0.0)) throw DomainError("laplace_green is singular at the origin");
    return 1.0 / (4.0 * M_PI * r);
}

Vec3 laplace_green_grad(const Vec3& x) {
    const double r = x.norm();
    if (!(r > 0.0)) throw DomainError("laplace_green is singular at the origin");
    return -x / (4.0 * M_PI * r * r * r);
}

VecEstimate slab_layer(const Vec3& x, const Vec3& c, double t, const std::array<int, 3>& alpha,
                       const QuadratureSpec& q) {
    require_time(t);
    if (!(x(2) > 0.0)) throw DomainError("slab layer needs x3 > 0");
    const auto fine = slab_level(x, c, t, alpha, q.points_per_dim, q.vertical_rule);
    // compare against a 3/4 level: a halved rule drops below the resolution of the
    // Gaussian box and overstates the error by orders of magnitude
    const int nc = coarse_points(q.points_per_dim);
    const auto coarse = slab_level(x, c, t, alpha, nc, q.vertical_rule);
    VecEstimate e;
    e.value = fine.value;
    e.error = (fine.value - coarse.value).cwiseAbs().maxCoeff();
    const double scale = std::max(fine.value.cwiseAbs().maxCoeff(), 1e-3 * fine.magnitude);
    if (e.error > q.tolerance * scale && e.error > 1e-14 * fine.magnitude + 1e-300) {
        std::ostringstream os;
        os << "slab layer quadrature did not converge at x=(" << x.transpose()
           << "): refinement difference " << e.error << " vs scale " << scale;
        throw NumericalError(os.str(), e.error);
    }
    return e;
}

Estimate gstar_estimate(int i, int j, const Vec3& x, const Vec3& y, double t,
                        const QuadratureSpec& q) {
    if (i < 1 || i > 3 || j < 1 || j > 2) throw std::invalid_argument("gstar: i in 1..3, j in 1..2");
    if (!(x(2) > 0.0) || !(y(2) > 0.0)) throw DomainError("gstar needs x3 > 0 and y3 > 0");
    require_time(t);
    const Vec3 ys = mirror(y);
    std::array<int, 3> a{0, 0, 0};
    a[j - 1] = 1;
    const auto L = slab_layer(x, ys, t, a, q);
    Estimate e;
    e.value = -(i == j ? heat_kernel(x - ys, t) : 0.0) - L.value(i - 1) / M_PI;
    e.error = L.error / M_PI;
    return e;
}

double gstar(int i, int j, const Vec3& x, const Vec3& y, double t, const QuadratureSpec& q) {
    return gstar_estimate(i, j, x, y, t, q).value;
}

VecEstimate ci_kernel_all(const Vec3& x, double t, const QuadratureSpec& q) {
    return slab_layer(x, Vec3::Zero(), t, {0, 0, 1}, q);
}

double ci_kernel(int i, const Vec3& x, double t, const QuadratureSpec& q) {
    if (i < 1 || i > 3) throw std::invalid_argument("ci_kernel: i in 1..3");
    return ci_kernel_all(x, t, q).value(i - 1);
}

// d_k C_i = \int d_k d_3 Gamma(y) (y - x)_i/|y - x|^3 dy: tangential k by
// integration by parts, k = 3 because d3 Gamma vanishes on y3 = 0.
Mat3 ci_kernel_grad(const Vec3& x, double t, const QuadratureSpec& q, double* error) {
    Mat3 g;
    double err = 0.0;
    for (int k = 0; k < 3; ++k) {
        std::array<int, 3> a{0, 0, 1};
        a[k] += 1;
        const auto L = slab_layer(x, Vec3::Zero(), t, a, q);
        g.col(k) = L.value;
        err = std::max(err, L.error);
    }
    if (error) *error = err;
    return g;
}

double boundary_kernel_K(int i, int j, const Vec3& x, double t, const QuadratureSpec& q) {
    if (i < 1 || i > 3 || j < 1 || j > 2)
        throw std::invalid_argument("boundary_kernel_K: i in 1..3, j in 1..2");
    if (!(x(2) > 0.0)) throw DomainError("boundary_kernel_K needs x3 > 0");
    std::array<int, 3> a{0, 0, 1};
    a[j - 1] += 1;
    const auto L = slab_layer(x, Vec3::Zero(), t, a, q);
    const double d3 = heat_kernel_deriv(x, t, {0, 0, 1});
    return (i == j ? -2.0 * d3 : 0.0) - L.value(i - 1) / M_PI;
}

// ---------------------------------------------------------------------------

CiTable::CiTable(const QuadratureSpec& q, double extent, double spacing)
    : n_(int(std::lround(extent / spacing)) + 1), h_(spacing), extent_(extent) {
    QuadratureSpec qt = q;
    qt.points_per_dim = std::min(q.points_per_dim, 32);
    qt.tolerance = std::max(q.tolerance, 1e-5);
    c_rho_.assign(size_t(n_) * n_, 0.0);
    c_3_.assign(size_t(n_) * n_, 0.0);
    for (int iz = 1; iz < n_; ++iz)
        for (int ir = 0; ir < n_; ++ir) {
            const Vec3 xi(ir * h_, 0.0, iz * h_);
            const auto e = slab_layer(xi, Vec3::Zero(), 1.0, {0, 0, 1}, qt);
            c_rho_[size_t(iz) * n_ + ir] = e.value(0);
            c_3_[size_t(iz) * n_ + ir] = e.value(2);
            max_error_ = std::max(max_error_, e.error);
        }
}

Vec3 CiTable::far_field(const Vec3& xi) {
    const double r2 = xi.squaredNorm(), r = std::sqrt(r2);
    const double r3 = r2 * r, r5 = r3 * r2;
    const double z = xi(2);
    const double c = 1.0 / std::sqrt(4.0 * M_PI);
    const double m0 = c * (std::exp(-z * z / 4.0) - 1.0);
    const double m1 = z * c * std::exp(-z * z / 4.0) - 0.5 * std::erf(z / 2.0);
    // second moments; the tangential ones fold into d33 k since k is harmonic
    const double m2 = z * z * c * std::exp(-z * z / 4.0) + 4.0 * m0;
    const double r7 = r5 * r2;
    Vec3 out = -xi / r3 * m0;
    for (int i = 0; i < 3; ++i) {
        const double d3k = (i == 2 ? 1.0 / r3 : 0.0) - 3.0 * xi(i) * z / r5;
        const double d33k =
            -3.0 * xi(i) / r5 + 15.0 * z * z * xi(i) / r7 - (i == 2 ? 6.0 * z / r5 : 0.0);
        out(i) += d3k * m1 + d33k * (m0 - 0.5 * m2);
    }
    return out;
}

double CiTable::lookup(const std::vector<double>& f, double rho, double z, bool odd) const {
    const double u = rho / h_, v = z / h_;
    const int i0 = int(std::floor(u)) - 1;
    int j0 = std::min(int(std::floor(v)) - 1, n_ - 4);
    j0 = std::max(j0, 0);
    double acc = 0.0;
    for (int b = 0; b < 4; ++b) {
        const int j = j0 + b;
        double wj = 1.0;
        for (int m = 0; m < 4; ++m)
            if (m != b) wj *= (v - (j0 + m)) / double(b - m);
        double row = 0.0;
        for (int a = 0; a < 4; ++a) {
            int i = i0 + a;
            double sgn = 1.0;
            if (i < 0) {
                i = -i;
                if (odd) sgn = -1.0;
            }
            double wi = 1.0;
            for (int m = 0; m < 4; ++m)
                if (m != a) wi *= (u - (i0 + m)) / double(a - m);
            row += wi * sgn * f[size_t(j) * n_ + i];
        }
        acc += wj * row;
    }
    return acc;
}

Vec3 CiTable::reference(const Vec3& xi) const {
    const double rho = std::hypot(xi(0), xi(1));
    const double z = xi(2);
    if (!(z > 0.0)) return Vec3::Zero();
    if (rho > extent_ - 2.0 * h_ || z > extent_ - 2.0 * h_) return far_field(xi);
    const double cr = lookup(c_rho_, rho, z, true);
    const double c3 = lookup(c_3_, rho, z, false);
    Vec3 out(0.0, 0.0, c3);
    if (rho > 0.0) {
        out(0) = cr * xi(0) / rho;
        out(1) = cr * xi(1) / rho;
    }
    return out;
}

Vec3 CiTable::operator()(const Vec3& x, double s) const {
    const double rs = std::sqrt(s);
    return reference(x / rs) / (s * rs);
}

std::shared_ptr<const CiTable> ci_table(const QuadratureSpec& q) {
    static std::mutex mu;
    static std::map<std::tuple<int, int, double>, std::shared_ptr<const CiTable>> cache;
    std::lock_guard<std::mutex> lock(mu);
    const auto key = std::make_tuple(std::min(q.points_per_dim, 32), int(q.vertical_rule),
                                     std::max(q.tolerance, 1e-5));
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto tab = std::make_shared<const CiTable>(q, 16.0, 0.25);
    cache.emplace(key, tab);
    return tab;
}

}  // namespace leray::kernels
