#include "doctest.h"

#include "leray/leray_solver.hpp"
#include "leray/verify.hpp"
#include "solver_fixtures.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <tuple>

using namespace leray;
using namespace leray::solver;

namespace {

using fixtures::grid;
using fixtures::swirl_background;

VectorField random_field(GridPtr g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    VectorField v(g);
    for (int i = 0; i < g->n_vel(); ++i) v.u(i) = u(rng);
    return v;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += std::log(x[i]), my += std::log(y[i]);
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = std::log(x[i]) - mx;
        sxy += a * (std::log(y[i]) - my);
        sxx += a * a;
    }
    return sxy / sxx;
}

std::string temp_dir(const char* tag) {
    auto p = std::filesystem::temp_directory_path() / (std::string("leray_") + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

}  // namespace

TEST_CASE("half-ball grid mask") {
    CHECK_THROWS_AS(HalfBallGrid(1.0, 0.2), ValidationError);
    const auto g = grid(1.0, 8);
    for (const auto& c : g->cells()) {
        const Vec3 x = g->cell_center(c[0], c[1], c[2]);
        CHECK(x.norm() < 1.0);
        CHECK(x(2) > 0.0);
    }
    for (int id = 0; id < g->n_vel(); ++id) {
        const auto f = g->faces()[id];
        int lo[3] = {f.i, f.j, f.k};
        lo[f.d] -= 1;
        CHECK(g->fluid(f.i, f.j, f.k));
        CHECK(g->fluid(lo[0], lo[1], lo[2]));
    }
    // the wall x3 = 0 carries no normal unknowns
    for (int id = 0; id < g->n_vel(); ++id)
        if (g->faces()[id].d == 2) CHECK(g->faces()[id].k > 0);
}

TEST_CASE("interpolation reproduces a linear field in the interior") {
    const auto g = grid(3.0, 12);
    Mat3 A;
    A << 0.3, -1.2, 0.5, 2.0, 0.1, -0.7, 0.4, 0.9, -0.4;
    const Vec3 b(0.2, -0.1, 0.6);
    VectorField v(g);
    for (int id = 0; id < g->n_vel(); ++id) {
        const int d = g->faces()[id].d;
        v.u(id) = A.row(d).dot(g->face_center(id)) + b(d);
    }
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int n = 0; n < 50;) {
        const Vec3 x(u(rng), u(rng), 0.5 * (u(rng) + 3));
        if (x(2) < 0.5 || x.norm() > 2.5) continue;  // two cells clear of every wall
        ++n;
        CHECK((interpolate(v, x) - (A * x + b)).norm() <= 1e-12);
        CHECK((interpolate_gradient(v, x) - A).norm() <= 1e-12);
    }
}

TEST_CASE("Stokes: zero force gives zero velocity and pressure") {
    const auto g = grid(1.0, 8);
    const auto r = stokes_solve(g, VectorField(g));
    CHECK(r.v.u.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.p.p.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Stokes: manufactured solution converges at second order") {
    std::vector<double> hs, errs;
    for (int n : {16, 32}) {
        const auto g = grid(1.0, n);
        const auto f = sample_faces(g, [](const Vec3& x) { return Vec3(-mms::lapV(x) + mms::gradP(x)); });
        const auto r = stokes_solve(g, f);
        const auto ex = sample_faces(g, mms::V);
        CHECK(r.stats.relative_residual <= 1e-10);
        CHECK(divergence(r.v).cwiseAbs().maxCoeff() < 1e-8 * ex.u.cwiseAbs().maxCoeff() / g->spacing());
        CHECK(std::abs(r.p.p.mean()) < 1e-12);
        hs.push_back(g->spacing());
        errs.push_back(std::sqrt((r.v.u - ex.u).squaredNorm() * g->cell_volume()));
    }
    const double order = slope(hs, errs);
    MESSAGE("order " << order);
    CHECK(order > 1.7);
    CHECK(order < 2.3);
}

TEST_CASE("Stokes: axisymmetric force gives an axisymmetric solution") {
    const auto g = grid(1.0, 12);
    auto force = [](const Vec3& x) {
        const double q = std::max(0.0, 1 - x.squaredNorm());
        return Vec3(q * q * x(2) * (Vec3(-x(1), x(0), 0) + Vec3(x(0), x(1), 0.3)));
    };
    const auto r = stokes_solve(g, sample_faces(g, force));
    Mat3 Q;
    Q << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    double worst = 0, scale = 0;
    for (int i = 0; i < 50; ++i) {
        const Vec3 x(u(rng), u(rng), 0.7 * std::abs(u(rng)));
        const Vec3 a = interpolate(r.v, Q * x), b = Q * interpolate(r.v, x);
        worst = std::max(worst, (a - b).norm());
        scale = std::max(scale, b.norm());
    }
    CHECK(scale > 0);
    CHECK(worst <= 1e-8 * scale);
}

TEST_CASE("F0: zero background and amplitude sweep") {
    const auto g = grid(3.0, 8);
    CHECK(assemble_F0(Background::none(g)).u.cwiseAbs().maxCoeff() == 0.0);

    // give the background a nonzero linear channel so both parts are exercised
    std::vector<double> eps{0.5, 0.25, 0.125}, quad;
    for (double e : eps) {
        Background b = swirl_background(g, e);
        for (int id = 0; id < g->n_vel(); ++id) b.linear[id] = e * Vec3(0.1, -0.2, 0.3);
        const auto f = assemble_F0(b);
        VectorField q(g);
        for (int id = 0; id < g->n_vel(); ++id) q.u(id) = f.u(id) - b.linear[id](g->faces()[id].d);
        CHECK(f.u.allFinite());
        quad.push_back(std::sqrt(l2_norm_sq(q)));
    }
    const double s = slope(eps, quad);
    CHECK(std::abs(s - 2.0) <= 0.05);
}

TEST_CASE("F1: advection oracle, zero and quadratic scaling") {
    const auto g = grid(1.0, 8);
    const auto bg = Background::none(g);
    CHECK(apply_F1(bg, VectorField(g)).u.cwiseAbs().maxCoeff() == 0.0);

    const auto v = random_field(g, 11);
    const auto f = apply_F1(bg, v);

    // independent evaluation: values looked up by position, derivatives from
    // three-point Lagrange stencils with the wall half a cell off
    const double h = g->spacing();
    std::map<std::tuple<int, long, long, long>, double> at;
    auto key = [&](int d, const Vec3& x) {
        return std::make_tuple(d, std::lround(2 * x(0) / h), std::lround(2 * x(1) / h), std::lround(2 * x(2) / h));
    };
    for (int id = 0; id < g->n_vel(); ++id) at[key(g->faces()[id].d, g->face_center(id))] = v.u(id);
    auto value = [&](int d, const Vec3& x, bool& found) {
        const auto it = at.find(key(d, x));
        found = it != at.end();
        return found ? it->second : 0.0;
    };
    auto lagrange_d0 = [](double a, double fa, double f0, double b, double fb) {
        // derivative at 0 of the quadratic through (a, fa), (0, f0), (b, fb)
        return -fa * b / (a * (a - b)) - f0 * (a + b) / (a * b) - fb * a / (b * (b - a));
    };
    double worst = 0, scale = 0;
    for (int id = 0; id < g->n_vel(); ++id) {
        const int d = g->faces()[id].d;
        const Vec3 x = g->face_center(id);
        Vec3 w;
        bool found;
        for (int e = 0; e < 3; ++e) {
            if (e == d) {
                w(e) = v.u(id);
                continue;
            }
            double s = 0;
            for (int a : {-1, 1})
                for (int b : {-1, 1}) {
                    Vec3 y = x;
                    y(d) += a * h / 2;
                    y(e) += b * h / 2;
                    s += value(e, y, found);
                }
            w(e) = s / 4;
        }
        double adv = 0;
        for (int e = 0; e < 3; ++e) {
            Vec3 xm = x, xp = x;
            xm(e) -= h;
            xp(e) += h;
            bool fm, fp;
            const double um = value(d, xm, fm), up = value(d, xp, fp);
            double du;
            if (e == d) {
                du = (up - um) / (2 * h);
            } else {
                const double a = fm ? -h : -h / 2, b = fp ? h : h / 2;
                du = lagrange_d0(a, um, v.u(id), b, up);
            }
            adv += w(e) * du;
        }
        worst = std::max(worst, std::abs(-adv - f.u(id)));
        scale = std::max(scale, std::abs(adv));
    }
    CHECK(worst <= 1e-12 * std::max(1.0, scale));

    VectorField v2(g);
    v2.u = 2 * v.u;
    CHECK((apply_F1(bg, v2).u - 4 * f.u).cwiseAbs().maxCoeff() <= 1e-12 * f.u.cwiseAbs().maxCoeff());

    CHECK_THROWS_AS(apply_F1(Background::none(grid(2.0, 8)), v), ValidationError);
}

TEST_CASE("H1 norm: zero, hand quadrature of a bump, scaling") {
    const auto g = grid(1.0, 16);
    CHECK(h1_norm(VectorField(g)) == 0.0);

    // x-component 1 on a 4x4x4 block of faces around (0, 0, 0.5): 96 unit
    // jumps across the block surface, 64 faces of volume h^3
    VectorField b(g);
    int count = 0;
    for (int i = 14; i < 18; ++i)
        for (int j = 14; j < 18; ++j)
            for (int k = 6; k < 10; ++k) {
                const int id = g->vel_id(0, i, j, k);
                REQUIRE(id >= 0);
                b.u(id) = 1.0;
                ++count;
            }
    REQUIRE(count == 64);
    const double h = g->spacing();
    CHECK(std::abs(h1_norm(b) * h1_norm(b) - (96 * h + 32 * h * h * h)) <= 1e-12);

    const auto v = random_field(g, 5);
    VectorField v2(g);
    v2.u = 2 * v.u;
    const double a = h1_norm(v), c = h1_norm(v2);
    CHECK(std::abs(c * c - 4 * a * a) <= 1e-12 * c * c);
}

TEST_CASE("continuation: schedule validation and the trivial branch") {
    const auto g = grid(3.0, 8);
    ContinuationOptions o;
    o.schedule = {0.0, 0.5};
    CHECK_THROWS_AS(leray_continuation(g, Background::none(g), o), ValidationError);
    o.schedule = {0.0, 0.5, 0.5, 1.0};
    CHECK_THROWS_AS(leray_continuation(g, Background::none(g), o), ValidationError);

    o.schedule = {0.0, 1.0};
    const auto st = leray_continuation(g, Background::none(g), o);
    CHECK(st.complete);
    CHECK(st.lambda == 1.0);
    CHECK(st.v.u.cwiseAbs().maxCoeff() == 0.0);

    // lambda = 0 is exactly zero even with a nonzero background
    const auto s2 = leray_continuation(g, swirl_background(g, 1.0), o);
    REQUIRE(!s2.steps.empty());
    CHECK(s2.steps.front().lambda == 0.0);
    CHECK(s2.steps.front().h1 == 0.0);
}

TEST_CASE("continuation on the swirl: Picard history, divergence, energy identity") {
    const auto g = grid(3.0, 12);
    const auto bg = swirl_background(g, 1.0);
    const auto st = leray_continuation(g, bg, {});
    REQUIRE(st.complete);
    CHECK(st.lambda == 1.0);
    for (const auto& s : st.steps) {
        if (!s.accepted) continue;
        for (std::size_t i = 1; i < s.residuals.size(); ++i) CHECK(s.residuals[i] <= s.residuals[i - 1]);
        CHECK(s.energy_residual <= 0.05);
    }
    const double vmax = st.v.u.cwiseAbs().maxCoeff();
    CHECK(vmax > 0);
    CHECK(divergence(st.v).cwiseAbs().maxCoeff() <= 1e-8 * vmax / g->spacing());
    CHECK(std::abs(st.p.p.mean()) < 1e-12);
    const auto f0 = assemble_F0(bg);
    CHECK(verify::energy_identity_residual(st.v, 1.0, bg, f0) == doctest::Approx(st.steps.back().energy_residual));
}

TEST_CASE("continuation: first step is proportional to the increment") {
    const auto g = grid(3.0, 8);
    const auto bg = swirl_background(g, 1.0);
    std::vector<double> h1;
    for (double dl : {0.25, 0.125}) {
        ContinuationOptions o;
        o.schedule = {0.0, dl, 1.0};
        const auto st = leray_continuation(g, bg, o);
        REQUIRE(st.steps.size() >= 2);
        h1.push_back(st.steps[1].h1);
    }
    CHECK(h1[0] / h1[1] == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("continuation: small data gives a quadratic branch") {
    const auto g = grid(3.0, 12);
    std::vector<double> eps{0.4, 0.2, 0.1}, h1;
    for (double e : eps) {
        const auto st = leray_continuation(g, swirl_background(g, e), {});
        REQUIRE(st.complete);
        h1.push_back(h1_norm(st.v));
    }
    CHECK(std::abs(slope(eps, h1) - 2.0) <= 0.1);
}

TEST_CASE("continuation: failure keeps the last good state") {
    const auto g = grid(3.0, 8);
    ContinuationOptions o;
    o.max_picard = 2;
    o.tolerance = 1e-14;
    o.min_step = 0.1;
    const auto st = leray_continuation(g, swirl_background(g, 1.0), o);
    CHECK_FALSE(st.complete);
    CHECK(st.lambda == 0.0);
    CHECK(st.message.find("continuation failed") != std::string::npos);
    CHECK(st.steps.size() >= 2);
    CHECK_FALSE(st.steps.back().accepted);
}

TEST_CASE("checkpoints: round trip, names, corruption") {
    const std::string dir = temp_dir("ckpt");
    const auto g = grid(3.0, 8);
    ContinuationOptions o;
    o.schedule = {0.0, 0.5, 1.0};
    o.checkpoint_dir = dir;
    const auto st = leray_continuation(g, swirl_background(g, 1.0), o);
    REQUIRE(st.complete);
    CHECK(checkpoint_name(3.0, 0.5) == "checkpoint_R3_lambda0.500000.bin");
    for (double l : {0.0, 0.5, 1.0})
        CHECK(std::filesystem::exists(std::filesystem::path(dir) / checkpoint_name(3.0, l)));

    const auto path = (std::filesystem::path(dir) / checkpoint_name(3.0, 1.0)).string();
    const auto c = load_checkpoint(path);
    CHECK(c.lambda == 1.0);
    CHECK(c.grid->radius() == 3.0);
    CHECK(c.grid->spacing() == g->spacing());
    CHECK(c.v.u == st.v.u);
    CHECK(c.p.p == st.p.p);

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(100);
        char b = 0;
        f.read(&b, 1);
        b ^= 0x10;
        f.seekp(100);
        f.write(&b, 1);
    }
    CHECK_THROWS_AS(load_checkpoint(path), IntegrityError);
    std::filesystem::resize_file(path, 40);
    CHECK_THROWS_AS(load_checkpoint(path), IntegrityError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("invading run: zero datum, validation, determinism") {
    auto spacing = [](double R) { return R / 8; };
    auto none = [](GridPtr g) { return Background::none(g); };
    CHECK_THROWS_AS(invading_run({2.0, 3.0}, spacing, none, {}), ValidationError);
    CHECK_THROWS_AS(invading_run({2.0, 3.0, 3.0}, spacing, none, {}), ValidationError);

    const auto z = invading_run({2.0, 3.0, 4.0}, spacing, none, {});
    CHECK(z.complete);
    for (const auto& r : z.runs) CHECK(r.h1 == 0.0);
    CHECK(z.final_change == 0.0);
    CHECK(z.stabilized);

    auto swirl = [](GridPtr g) { return swirl_background(g, 1.0); };
    const auto a = invading_run({2.0, 2.5, 3.0}, spacing, swirl, {}, 1);
    const auto b = invading_run({2.0, 2.5, 3.0}, spacing, swirl, {}, 2);
    REQUIRE(a.complete);
    for (std::size_t i = 0; i < a.runs.size(); ++i) {
        CHECK(a.runs[i].h1 > 0);
        CHECK(a.runs[i].h1 == b.runs[i].h1);
    }
    CHECK(a.final_change == b.final_change);
}

TEST_CASE("H1 norm is grid-converged at fixed radius") {
    std::vector<double> h1;
    for (int n : {12, 24}) {
        const auto g = grid(3.0, n);
        const auto st = leray_continuation(g, swirl_background(g, 1.0), {});
        REQUIRE(st.complete);
        h1.push_back(h1_norm(st.v));
    }
    CHECK(std::abs(h1[1] - h1[0]) <= 0.05 * h1[1]);
}
