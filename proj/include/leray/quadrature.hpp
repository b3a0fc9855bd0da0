#pragma once

#include <cmath>
#include <algorithm>
#include <vector>

namespace leray::quad {

struct Rule {
    std::vector<double> x;  // nodes on [-1, 1]
    std::vector<double> w;
};

// Gauss-Legendre rule with n points (1 <= n <= 128); cached, thread safe.
const Rule& gauss_legendre(int n);

struct Node {
    double x, w;
};

// Composite Gauss-Legendre rule over the panels [b[k], b[k+1]].
std::vector<Node> composite(const std::vector<double>& breaks, int order);

// Uniform midpoint rule with n points on [a, b].
std::vector<Node> midpoint(double a, double b, int n);

// Breakpoints splitting [a, b] into n equal panels, refined near each focus
// point f by extra breaks at f +- s and f +- 2s (only those inside).
std::vector<double> panel_breaks(double a, double b, int n,
                                 const std::vector<double>& focus = {},
                                 double s = 0.0);

// Geometric breaks 0, r0, 2 r0, 4 r0, ... up to rmax (rmax always included).
std::vector<double> geometric_breaks(double r0, double rmax);

// Smooth (C-infinity) cutoff: 1 for r <= r1, 0 for r >= r2.
inline double cutoff(double r, double r1, double r2) {
    if (r <= r1) return 1.0;
    if (r >= r2) return 0.0;
    const double s = (r - r1) / (r2 - r1);
    const double a = std::exp(-1.0 / (1.0 - s));
    const double b = std::exp(-1.0 / s);
    return a / (a + b);
}

// Cubic Lagrange weights for a stencil starting at i0 (clamped to [0, n-4]).
inline int lagrange4(double u, int n, double w[4]) {
    int i0 = int(std::floor(u)) - 1;
    i0 = std::clamp(i0, 0, n - 4);
    for (int a = 0; a < 4; ++a) {
        double p = 1.0;
        for (int m = 0; m < 4; ++m)
            if (m != a) p *= (u - (i0 + m)) / double(a - m);
        w[a] = p;
    }
    return i0;
}

}  // namespace leray::quad
