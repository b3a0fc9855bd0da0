#include "doctest.h"

#include "leray/kernels.hpp"

#include <cmath>
#include <random>

using namespace leray;
using namespace leray::kernels;

namespace {

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) { mx += std::log(x[i]); my += std::log(y[i]); }
    mx /= x.size(); my /= y.size();
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

QuadratureSpec spec(int n, double tol = 1e-5) {
    QuadratureSpec q;
    q.points_per_dim = n;
    q.tolerance = tol;
    return q;
}

}  // namespace

TEST_CASE("heat kernel closed forms") {
    CHECK(heat_kernel(Vec3::Zero(), 1.0 / (4.0 * M_PI)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(heat_kernel(Vec3(1, 0, 0), 0.25) ==
          doctest::Approx(std::pow(M_PI, -1.5) * std::exp(-1.0)).epsilon(1e-14));
    CHECK(heat_kernel(Vec3(1, 0, 0), 0.25) == doctest::Approx(0.066066).epsilon(1e-5));
    CHECK(heat_kernel_deriv(Vec3(0.3, 0.2, 0.0), 0.7, {0, 0, 1}) == 0.0);
    const Vec3 e3(0, 0, 1);
    CHECK(heat_kernel_deriv(e3, 0.25, {0, 0, 1}) ==
          doctest::Approx(-2.0 * heat_kernel(e3, 0.25)).epsilon(1e-14));
    CHECK_THROWS_AS(heat_kernel(e3, 0.0), DomainError);
    CHECK_THROWS_AS(heat_kernel_deriv(e3, 1.0, {1, 1, 1}), std::invalid_argument);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N;
    for (int k = 0; k < 10; ++k) {
        const Vec3 x(N(rng), N(rng), N(rng));
        CHECK(heat_kernel(x, 0.3) == heat_kernel(-x, 0.3));
    }
}

TEST_CASE("heat kernel normalization") {
    for (double t : {0.1, 0.5, 1.0}) {
        const int n = 120;
        const double L = 6.0 * std::sqrt(t), h = 2 * L / n;
        double s = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    s += heat_kernel(Vec3(-L + (i + 0.5) * h, -L + (j + 0.5) * h, -L + (k + 0.5) * h), t);
        CHECK(std::abs(s * h * h * h - 1.0) < 1e-4);
    }
}

TEST_CASE("heat kernel derivatives match finite differences") {
    const Vec3 x0(0.5, 0.5, 0.5);
    const double t = 0.5, h = 1e-4;
    for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e(a) = h;
        std::array<int, 3> k{0, 0, 0};
        k[a] = 1;
        const double fd = (heat_kernel(x0 + e, t) - heat_kernel(x0 - e, t)) / (2 * h);
        CHECK(heat_kernel_deriv(x0, t, k) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("laplace green") {
    CHECK(laplace_green(Vec3(1, 0, 0)) == doctest::Approx(0.0795775).epsilon(1e-6));
    CHECK(laplace_green(Vec3(0, 2, 0)) == doctest::Approx(0.0397887).epsilon(1e-6));
    const Vec3 x(0.3, -0.2, 0.9);
    CHECK(laplace_green(3.0 * x) == doctest::Approx(laplace_green(x) / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(laplace_green(Vec3::Zero()), DomainError);
}

TEST_CASE("gstar self-convergence and translation invariance") {
    const Vec3 x(0, 0, 1), y(1, 0, 1);
    for (int i = 1; i <= 3; ++i)
        for (int j = 1; j <= 2; ++j) {
            const double a = gstar(i, j, x, y, 0.5, spec(32, 1e-3));
            const double b = gstar(i, j, x, y, 0.5, spec(64, 1e-3));
            const double scale = std::max(std::abs(b), 1e-3);
            CHECK(std::abs(a - b) < 1e-2 * scale);
        }
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(-3, 3);
    for (int k = 0; k < 4; ++k) {
        const Vec3 c(U(rng), 0, 0);
        const double a = gstar(1, 1, x, y, 0.5, spec(32));
        const double b = gstar(1, 1, x + c, y + c, 0.5, spec(32));
        CHECK(std::abs(a - b) < 1e-5 * std::abs(a));
    }
}

TEST_CASE("ci kernel symmetry, convergence and derivatives") {
    const auto q = spec(32);
    CHECK(std::abs(ci_kernel(1, Vec3(0, 0, 0.8), 0.5, q)) < 1e-12);
    CHECK(std::abs(ci_kernel(2, Vec3(0, 0, 0.8), 0.5, q)) < 1e-12);
    const Vec3 x(1, 0, 1);
    for (int i = 1; i <= 3; ++i) {
        const double a = ci_kernel(i, x, 0.5, spec(24, 1e-3));
        const double b = ci_kernel(i, x, 0.5, spec(48, 1e-3));
        CHECK(std::abs(a - b) <= 1e-2 * std::max(std::abs(b), 1e-4));
    }
    // differentiated-kernel quadrature against differences of the kernel itself
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-1.5, 1.5), Z(0.3, 1.5);
    for (int s = 0; s < 20; ++s) {
        const Vec3 p(U(rng), U(rng), Z(rng));
        double err = 0.0;
        const Mat3 g = ci_kernel_grad(p, 0.5, q, &err);
        const double h = 1e-3;
        for (int k = 0; k < 3; ++k) {
            Vec3 e = Vec3::Zero();
            e(k) = h;
            const Vec3 fd = (ci_kernel_all(p + e, 0.5, q).value - ci_kernel_all(p - e, 0.5, q).value) / (2 * h);
            const double scale = std::max(g.col(k).cwiseAbs().maxCoeff(), 1e-2);
            CHECK((fd - g.col(k)).cwiseAbs().maxCoeff() <= 10 * q.tolerance * scale + 1e-6 * scale);
        }
    }
}

TEST_CASE("ci kernel decay and table") {
    const auto q = spec(32);
    std::vector<double> r, v;
    for (double s = 4; s <= 40.0; s *= 1.26) {
        const Vec3 x(s / std::sqrt(2.0), 0, s / std::sqrt(2.0));
        r.push_back(s + std::sqrt(0.5));
        v.push_back(ci_kernel_all(x, 0.5, q).value.norm());
    }
    CHECK(fit_slope(r, v) == doctest::Approx(-2.0).epsilon(0.15));

    auto tab = ci_table(q);
    for (const Vec3 xi : {Vec3(0.7, 0.2, 0.9), Vec3(3.1, -2.0, 1.7), Vec3(0.1, 0.05, 5.2)}) {
        const Vec3 a = tab->reference(xi);
        const Vec3 b = ci_kernel_all(xi, 1.0, q).value;
        CHECK((a - b).norm() < 1e-3 * b.norm() + 1e-6);
        // scaling C(x, s) = s^{-3/2} C(x/sqrt(s), 1)
        const Vec3 c = (*tab)(0.5 * xi, 0.25);
        const Vec3 d = ci_kernel_all(0.5 * xi, 0.25, q).value;
        CHECK((c - d).norm() < 1e-3 * d.norm() + 1e-6);
    }
    const Vec3 far(12.0, 5.0, 9.0);
    CHECK((CiTable::far_field(far) - ci_kernel_all(far, 1.0, q).value).norm() <
          5e-4 * ci_kernel_all(far, 1.0, q).value.norm());
}

TEST_CASE("boundary kernel K") {
    const auto q = spec(32);
    const Vec3 x(0.7, -0.4, 0.6);
    CHECK(boundary_kernel_K(2, 1, x, 0.5, q) ==
          doctest::Approx(-ci_kernel_grad(x, 0.5, q)(1, 0) / M_PI).epsilon(1e-12));
    std::vector<double> r, v;
    for (double s = 3; s <= 30.0; s *= 1.26) {
        r.push_back(std::sqrt(s * s + 0.25) + std::sqrt(0.5));
        v.push_back(std::abs(boundary_kernel_K(1, 1, Vec3(s, 0, 0.5), 0.5, q)));
    }
    CHECK(fit_slope(r, v) == doctest::Approx(-3.0).epsilon(0.4 / 3.0));
    const double a = boundary_kernel_K(1, 1, x, 0.5, spec(24, 1e-3));
    const double b = boundary_kernel_K(1, 1, x, 0.5, spec(48, 1e-3));
    CHECK(std::abs(a - b) < 1e-2 * std::abs(b));
}
