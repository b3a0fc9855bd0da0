#include "leray/quadrature.hpp"

#include <algorithm>
#include <array>
#include <mutex>
#include <stdexcept>

namespace leray::quad {

namespace {

// Legendre P_n and its derivative at z.
void legendre(int n, double z, double& p, double& dp) {
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    p = (n == 0) ? 1.0 : p1;
    dp = n * (z * p - p0) / (z * z - 1.0);
}

Rule build_rule(int n) {
    Rule r;
    r.x.assign(n, 0.0);
    r.w.assign(n, 0.0);
    if (n == 1) {
        r.w[0] = 2.0;
        return r;
    }
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double p = 0.0, dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            legendre(n, z, p, dp);
            const double dz = p / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        legendre(n, z, p, dp);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = w;
        r.w[n - 1 - i] = w;
    }
    if (n % 2 == 1) r.x[n / 2] = 0.0;
    return r;
}

}  // namespace

const Rule& gauss_legendre(int n) {
    constexpr int kMax = 128;
    if (n < 1 || n > kMax) throw std::invalid_argument("gauss_legendre: unsupported order");
    static std::array<Rule, kMax + 1> cache;
    static std::array<std::once_flag, kMax + 1> flags;
    std::call_once(flags[n], [n] { cache[n] = build_rule(n); });
    return cache[n];
}

std::vector<Node> composite(const std::vector<double>& breaks, int order) {
    const Rule& r = gauss_legendre(order);
    std::vector<Node> out;
    out.reserve(breaks.size() * order);
    for (size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double a = breaks[k], b = breaks[k + 1];
        if (!(b > a)) continue;
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        for (int i = 0; i < order; ++i) out.push_back({c + h * r.x[i], h * r.w[i]});
    }
    return out;
}

std::vector<Node> midpoint(double a, double b, int n) {
    std::vector<Node> out;
    if (!(b > a) || n < 1) return out;
    const double h = (b - a) / n;
    for (int i = 0; i < n; ++i) out.push_back({a + (i + 0.5) * h, h});
    return out;
}

std::vector<double> panel_breaks(double a, double b, int n, const std::vector<double>& focus,
                                 double s) {
    std::vector<double> br;
    n = std::max(n, 1);
    for (int i = 0; i <= n; ++i) br.push_back(a + (b - a) * i / n);
    if (s > 0.0) {
        for (double f : focus) {
            for (double m : {-2.0, -1.0, 1.0, 2.0}) {
                const double p = f + m * s;
                if (p > a && p < b) br.push_back(p);
            }
        }
    }
    std::sort(br.begin(), br.end());
    std::vector<double> out;
    const double eps = 1e-12 * std::max(1.0, std::abs(b - a));
    for (double p : br)
        if (out.empty() || p - out.back() > eps) out.push_back(p);
    if (out.back() < b) out.back() = b;
    return out;
}

std::vector<double> geometric_breaks(double r0, double rmax) {
    std::vector<double> br{0.0};
    double r = r0;
    while (r < rmax) {
        br.push_back(r);
        r *= 2.0;
    }
    br.push_back(rmax);
    return br;
}

}  // namespace leray::quad
