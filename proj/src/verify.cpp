#include "leray/verify.hpp"

#include "leray/quadrature.hpp"
#include "leray/stokes.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace leray::verify {

namespace {

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

// ---------------------------------------------------------------------------

VectorField random_trial_field(GridPtr g, std::uint64_t seed, int bumps) {
    const double R = g->radius(), h = g->spacing();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> N(0.0, 1.0);
    struct Bump {
        Vec3 c, w;
        double rho;
    };
    std::vector<Bump> bs;
    // a bump of radius rho fits when rho + 2h <= c3 and |c| <= R - rho - 3h
    const double rmin = 2 * h, rmax = std::min(R / 4, 0.5 * (R - 5 * h));
    if (rmax < rmin) throw ValidationError("trial fields: grid too coarse (need R/h >= 9)");
    while (int(bs.size()) < bumps) {
        Bump b;
        b.rho = rmin * std::pow(rmax / rmin, U(rng));
        b.c = Vec3((2 * U(rng) - 1) * R, (2 * U(rng) - 1) * R, U(rng) * R);
        if (b.c.norm() + b.rho + 3 * h > R || b.c(2) - b.rho < 2 * h) continue;
        b.w = Vec3(N(rng), N(rng), N(rng)) * b.rho;
        bs.push_back(b);
    }
    auto A = [&](int comp, const Vec3& x) {
        double s = 0.0;
        for (const auto& b : bs) {
            const double q = (x - b.c).squaredNorm() / (b.rho * b.rho);
            if (q < 1.0) s += b.w(comp) * (1 - q) * (1 - q) * (1 - q);
        }
        return s;
    };
    VectorField eta(g);
    for (int id = 0; id < g->n_vel(); ++id) {
        const int d = g->faces()[id].d, e = (d + 1) % 3, f = (d + 2) % 3;
        const Vec3 x = g->face_center(id);
        Vec3 de = Vec3::Zero(), df = Vec3::Zero();
        de(e) = 0.5 * h;
        df(f) = 0.5 * h;
        // circulation of A around the face
        eta.u(id) = (A(f, x + de) - A(f, x - de) - A(e, x + df) + A(e, x - df)) / h;
    }
    return eta;
}

Assumption31 assumption31_check(const propagator::ProfileTable& u0, const Background& bg,
                                const Assumption31Options& opt) {
    Assumption31 out;
    out.radii = opt.radii;
    out.trial_count = opt.trial_count;
    out.seed = opt.seed;
    if (opt.radii.size() < 2) throw ValidationError("assumption check needs at least two radii");
    for (std::size_t i = 0; i < opt.radii.size(); ++i)
        if (!(opt.radii[i] > 0) || (i && !(opt.radii[i] > opt.radii[i - 1])))
            throw ValidationError("truncation radii must be positive and increasing");
    const double Rmax = opt.radii.back();
    if (!u0.is_zero() && Rmax > u0.extent())
        throw ValidationError("truncation radius beyond the profile table");
    if (opt.trial_count < 1) throw ValidationError("trial count must be positive");

    // spherical quadrature: radial Gauss panels (every radius is a break),
    // mu = cos(theta) graded toward the wall, periodic trapezoid in phi
    std::vector<double> rb;
    for (double r = 0.0; r < Rmax - 1e-12; r += 0.5) rb.push_back(r);
    for (double r : opt.radii) rb.push_back(r);
    std::sort(rb.begin(), rb.end());
    rb.erase(std::unique(rb.begin(), rb.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             rb.end());
    const auto mu = quad::composite({0.0, 0.01, 0.03, 0.1, 0.3, 0.6, 1.0}, 6);
    const int nphi = 48;
    auto sphere = [&](double r, double& f6, double& g2) {
        f6 = g2 = 0.0;
        for (const auto& m : mu) {
            const double st = std::sqrt(std::max(0.0, 1 - m.x * m.x));
            for (int j = 0; j < nphi; ++j) {
                const double ph = 2 * M_PI * j / nphi;
                const Vec3 x = r * Vec3(st * std::cos(ph), st * std::sin(ph), m.x);
                const auto s = u0(x);
                const double v2 = s.value.squaredNorm();
                const double w = m.w * 2 * M_PI / nphi;
                f6 += w * v2 * v2 * v2;
                g2 += w * s.grad.squaredNorm();
            }
        }
    };
    if (u0.is_zero()) {
        out.l6_truncated.assign(opt.radii.size(), 0.0);
        out.l2grad_truncated.assign(opt.radii.size(), 0.0);
        out.l6_extrapolated.assign(opt.radii.size(), 0.0);
        out.conclusive = true;
    } else {
        double c6 = 0, c2 = 0;
        std::vector<double> sph6, sph2;
        std::size_t next = 0;
        const auto& gl = quad::gauss_legendre(6);
        for (std::size_t p = 0; p + 1 < rb.size(); ++p) {
            const double a = rb[p], b = rb[p + 1];
            for (std::size_t q = 0; q < gl.x.size(); ++q) {
                const double r = 0.5 * (a + b) + 0.5 * (b - a) * gl.x[q];
                double f6, g2;
                sphere(r, f6, g2);
                const double w = 0.5 * (b - a) * gl.w[q] * r * r;
                c6 += w * f6;
                c2 += w * g2;
            }
            if (std::abs(b - opt.radii[next]) < 1e-12) {
                out.l6_truncated.push_back(c6);
                out.l2grad_truncated.push_back(c2);
                double a6, a2;
                sphere(b, a6, a2);
                sph6.push_back(a6);
                sph2.push_back(a2);
                ++next;
            }
        }
        // tails beyond each radius from the angular integrals there
        out.conclusive = opt.value_slope && opt.grad_slope;
        if (out.conclusive) {
            const double sv = *opt.value_slope + opt.value_tolerance;
            const double sg = *opt.grad_slope + opt.grad_tolerance;
            if (-6 * sv - 3 > 0 && -2 * sg - 3 > 0) {
                for (std::size_t i = 0; i < opt.radii.size(); ++i) {
                    const double r3 = std::pow(opt.radii[i], 3);
                    out.l6_extrapolated.push_back(out.l6_truncated[i] + sph6[i] * r3 / (-6 * sv - 3));
                }
                out.l6_tail = out.l6_extrapolated.back() - out.l6_truncated.back();
                out.l2grad_tail = sph2.back() * std::pow(Rmax, 3) / (-2 * sg - 3);
            } else {
                out.conclusive = false;
                out.note = "decay slopes too shallow to bound the tails";
            }
        } else {
            out.note = "decay fit unavailable: tails not bounded";
        }
    }
    const std::size_t k = out.radii.size();
    out.l6_norm_U0 = std::pow(out.l6_truncated.back() + out.l6_tail, 1.0 / 6);
    out.l2_norm_gradU0 = std::sqrt(out.l2grad_truncated.back() + out.l2grad_tail);
    auto change = [&](const std::vector<double>& v) {
        return v.size() < k || v[k - 1] == 0.0 ? 0.0 : std::abs(v[k - 1] - v[k - 2]) / v[k - 1];
    };
    out.l6_change = change(out.l6_truncated);
    out.l6_extrapolated_change = change(out.l6_extrapolated);

    // weak bounds over random trial fields
    const VectorField f0 = solver::assemble_F0(bg);
    std::mt19937_64 rng(opt.seed);
    double sup1 = 0, sup2 = 0, adv = 0;
    for (int i = 0; i < 2 * opt.trial_count; ++i) {
        const auto eta = random_trial_field(bg.grid, rng());
        const double n = solver::h1_norm(eta);
        const double r = std::abs(solver::inner(f0, eta)) / n;
        const double a = std::abs(solver::inner(solver::advect_background(bg, eta), eta)) / (n * n);
        if (i < opt.trial_count) {
            sup1 = std::max(sup1, r);
            adv = std::max(adv, a);
        }
        sup2 = std::max(sup2, r);
    }
    out.f0_weak_bound = sup1;
    out.advective_bound = adv;
    out.f0_weak_bound_doubled = sup2;
    out.weak_bound_change = sup2 == 0.0 ? 0.0 : (sup2 - sup1) / sup2;
    out.f0_dual_bound = std::sqrt(solver::dirichlet_energy(solver::stokes_solve(bg.grid, f0).v));
    const bool finite = std::isfinite(out.l6_norm_U0) && std::isfinite(out.l2_norm_gradU0) &&
                        std::isfinite(sup2) && std::isfinite(adv);
    out.pass = out.conclusive && finite && out.l6_extrapolated_change < 0.05 && out.weak_bound_change < 0.2;
    return out;
}

double energy_identity_residual(const VectorField& v, double lambda, const Background& bg,
                                const VectorField& f0) {
    const double j2 = solver::dirichlet_energy(v);
    const double lhs = j2 + 0.5 * lambda * solver::l2_norm_sq(v);
    VectorField f = f0;
    f.u -= solver::advect_background(bg, v).u;
    const double rhs = lambda * solver::inner(f, v);
    return std::abs(lhs - rhs) / std::max(j2, 1e-12);
}

// ---------------------------------------------------------------------------

ProfileFn solved_profile(const propagator::ProfileTable* u0, const VectorField& v) {
    const double R = v.grid->radius();
    if (u0 && !u0->is_zero() && u0->extent() < R)
        throw ValidationError("profile table smaller than the solved domain");
    return [u0, v, R](const Vec3& y) -> Vec3 {
        if (!(y(2) >= 0.0) || !(y.norm() <= R))
            throw DomainError("point outside the solved domain; extrapolation refused");
        Vec3 out = solver::interpolate(v, y);
        if (u0 && !u0->is_zero()) out += (*u0)(y).value;
        return out;
    };
}

Vec3 reconstruct(const ProfileFn& U, double t, const Vec3& x) {
    if (!(t > 0.0)) throw DomainError("reconstruction needs t > 0");
    const double s = std::sqrt(2 * t);
    return U(x / s) / s;
}

ScalingIdentity scaling_identity_check(const ProfileFn& U, double radius, int points, std::uint64_t seed) {
    ScalingIdentity out;
    out.points = points;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < points; ++i) {
        const double t = 0.125 + 0.375 * u(rng);
        const double z = u(rng), ph = 2 * M_PI * u(rng), st = std::sqrt(1 - z * z);
        const double r = 0.95 * radius * std::sqrt(2 * t) * std::cbrt(u(rng));
        const Vec3 x = r * Vec3(st * std::cos(ph), st * std::sin(ph), z);
        const Vec3 a = reconstruct(U, t, x);
        const Vec3 b = 2.0 * reconstruct(U, 4 * t, 2.0 * x);
        num = std::max(num, (a - b).norm());
        den = std::max(den, a.norm());
        ++out.checked;
    }
    out.max_relative = den == 0.0 ? num : num / den;
    out.pass = out.checked == points && out.max_relative <= out.tolerance;
    return out;
}

NormScaling norm_scaling_check(const VectorField& v, const std::vector<double>& times, double spacing,
                               double observation_radius) {
    NormScaling out;
    if (times.empty()) throw ValidationError("norm scaling needs at least one time");
    for (double t : times)
        if (!(t > 0.0)) throw DomainError("norm scaling needs t > 0");
    const auto& g = *v.grid;
    const double R = g.radius();
    const double ho = spacing > 0.0 ? spacing : g.spacing() / 4;
    if (v.u.size() == 0 || v.u.cwiseAbs().maxCoeff() == 0.0) {
        out.vacuous = true;
        out.pass = true;
        for (double t : times) {
            out.times.push_back(t);
            out.l2.push_back(0.0);
            out.grad_l2.push_back(0.0);
        }
        return out;
    }
    for (double t : times) {
        const double s = std::sqrt(2 * t), Rs = s * R;
        if (observation_radius > 0.0 && Rs > observation_radius) {
            out.rejected.push_back(t);
            continue;
        }
        // fixed lattice, offset so that no rescaled node sits on a lattice
        // plane of V; the interpolants reach up to two cells beyond the ball
        const double Rsup = s * (R + 3 * g.spacing());
        const int n = int(std::ceil(Rsup / ho)) + 1;
        const Vec3 off(0.5 + 0.1372, 0.5 + 0.2913, 0.5 - 0.0847);
        double a2 = 0.0, g2 = 0.0;
        for (int k = 0; k < n; ++k)
            for (int j = -n; j < n; ++j)
                for (int i = -n; i < n; ++i) {
                    const Vec3 x = ho * (Vec3(i, j, k) + off);
                    if (x(2) <= 0.0 || x.norm() >= Rsup) continue;
                    // v(x, t) = V(x / s) / s and grad v(x, t) = grad V(x / s) / s^2
                    const Vec3 y = x / s;
                    a2 += solver::interpolate(v, y).squaredNorm() / (s * s);
                    g2 += solver::interpolate_gradient(v, y).squaredNorm() / std::pow(s, 4);
                }
        const double vol = ho * ho * ho;
        out.times.push_back(t);
        out.l2.push_back(std::sqrt(a2 * vol));
        out.grad_l2.push_back(std::sqrt(g2 * vol));
    }
    if (out.times.size() < 2) return out;
    std::vector<double> lt, la, lg;
    for (std::size_t i = 0; i < out.times.size(); ++i) {
        lt.push_back(std::log(out.times[i]));
        la.push_back(std::log(out.l2[i]));
        lg.push_back(std::log(out.grad_l2[i]));
    }
    out.l2_exponent = ls_slope(lt, la);
    out.grad_exponent = ls_slope(lt, lg);
    out.pass = std::abs(out.l2_exponent - 0.25) <= out.tolerance &&
               std::abs(out.grad_exponent + 0.25) <= out.tolerance;
    return out;
}

std::vector<Vec3> bound_samples(double r0, double r1, int per_ray) {
    std::vector<Vec3> out;
    for (const Vec3& d : {Vec3(1, 0, 1), Vec3(1, 1, 0.3), Vec3(0.3, -1, 2), Vec3(0, 0, 1)}) {
        const auto r = propagator::ray_points(d, r0, r1, per_ray);
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

BackgroundBound background_bound_check(const data::SelfSimilarDatum& d, const std::vector<Vec3>& samples,
                                       const std::vector<double>& times,
                                       const propagator::QuadratureSpec& q, int jobs) {
    BackgroundBound out;
    out.times = times;
    propagator::Options po;
    po.jobs = jobs;
    std::vector<Vec3> doubled;
    for (const auto& x : samples) doubled.push_back(2.0 * x);
    auto ratio = [&](double t, const std::vector<Vec3>& pts) {
        const auto f = propagator::propagate_solonnikov(d, t, pts, q, po);
        double m = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i)
            m = std::max(m, f.values[i].norm() * (std::sqrt(t) + pts[i].norm()));
        return m;
    };
    for (double t : times) {
        out.ratio.push_back(ratio(t, samples));
        out.scaled_ratio.push_back(ratio(4 * t, doubled));
    }
    const double hi = *std::max_element(out.ratio.begin(), out.ratio.end());
    const double lo = *std::min_element(out.ratio.begin(), out.ratio.end());
    out.spread = hi == 0.0 ? 0.0 : hi / lo - 1.0;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (out.ratio[i] > 0.0)
            out.scaling_mismatch =
                std::max(out.scaling_mismatch, std::abs(out.scaled_ratio[i] - out.ratio[i]) / out.ratio[i]);
    const bool finite = std::isfinite(hi) && std::isfinite(out.scaling_mismatch);
    out.pass = finite && out.spread <= 0.2 && out.scaling_mismatch <= 10 * q.tolerance + 1e-12;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

bool decay_ok(const propagator::DecayReport& r) {
    if (r.trivial) return true;
    if (r.fits.empty()) return false;
    for (const auto& f : r.fits) {
        // |U0 + x.grad U0| is an upper bound, the other two are rates
        const bool ok = f.quantity == "abs_U0_plus_x_grad_U0" ? f.fitted && f.within_bound : f.pass;
        if (!ok) return false;
    }
    return true;
}

using J = nlohmann::ordered_json;

J num(double x) { return std::isfinite(x) ? J(x) : J(); }

J arr(const std::vector<double>& v) {
    J a = J::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

}  // namespace

void DiagnosticsReport::finalize() {
    bool ok = true;
    if (assumption31) ok = ok && assumption31->pass;
    for (const auto& e : energy_identity_residuals)
        ok = ok && std::isfinite(e.residual) && e.residual <= energy_tolerance;
    if (decay) ok = ok && decay_ok(*decay);
    if (norm_scaling) ok = ok && norm_scaling->pass;
    if (scaling_identity) ok = ok && scaling_identity->pass;
    if (background_bound) ok = ok && background_bound->pass;
    overall_pass = ok;
}

std::string DiagnosticsReport::to_json() const {
    J j;
    j["schema"] = "verify-v1";
    j["seed"] = seed;
    if (assumption31) {
        const auto& a = *assumption31;
        J o;
        o["l6_norm_U0"] = num(a.l6_norm_U0);
        o["l2_norm_gradU0"] = num(a.l2_norm_gradU0);
        o["f0_weak_bound"] = num(a.f0_weak_bound);
        o["f0_weak_bound_doubled_trials"] = num(a.f0_weak_bound_doubled);
        o["f0_dual_bound"] = num(a.f0_dual_bound);
        o["advective_bound"] = num(a.advective_bound);
        o["radii"] = arr(a.radii);
        o["l6_truncated"] = arr(a.l6_truncated);
        o["l2_grad_truncated"] = arr(a.l2grad_truncated);
        o["l6_tail"] = num(a.l6_tail);
        o["l2_grad_tail"] = num(a.l2grad_tail);
        o["l6_extrapolated"] = arr(a.l6_extrapolated);
        o["l6_truncated_relative_change"] = num(a.l6_change);
        o["l6_extrapolated_relative_change"] = num(a.l6_extrapolated_change);
        o["f0_weak_bound_relative_change"] = num(a.weak_bound_change);
        o["trial_count"] = a.trial_count;
        o["seed"] = a.seed;
        o["conclusive"] = a.conclusive;
        o["pass"] = a.pass;
        if (!a.note.empty()) o["note"] = a.note;
        j["assumption31"] = o;
    }
    J en = J::array();
    bool en_ok = true;
    for (const auto& e : energy_identity_residuals) {
        J o;
        o["lambda"] = e.lambda;
        o["radius"] = e.radius;
        o["spacing"] = e.spacing;
        o["residual"] = num(e.residual);
        en.push_back(o);
        en_ok = en_ok && std::isfinite(e.residual) && e.residual <= energy_tolerance;
    }
    j["energy_identity_residuals"] = en;
    j["energy_identity_tolerance"] = energy_tolerance;
    j["energy_identity_pass"] = en_ok;
    if (decay) {
        J d = J::parse(decay->to_json());
        d["certified"] = decay_ok(*decay);
        j["decay_fits"] = d;
    }
    J rc = J::array();
    if (norm_scaling) {
        const auto& n = *norm_scaling;
        for (std::size_t i = 0; i < n.times.size(); ++i) {
            J o;
            o["t"] = n.times[i];
            o["l2_norm_v"] = num(n.l2[i]);
            o["l2_norm_grad_v"] = num(n.grad_l2[i]);
            rc.push_back(o);
        }
    }
    j["reconstruction_checks"] = rc;
    if (norm_scaling) {
        const auto& n = *norm_scaling;
        J o;
        o["l2_exponent"] = num(n.l2_exponent);
        o["l2_target"] = 0.25;
        o["grad_exponent"] = num(n.grad_exponent);
        o["grad_target"] = -0.25;
        o["tolerance"] = n.tolerance;
        o["rejected_times"] = arr(n.rejected);
        o["vacuous"] = n.vacuous;
        o["pass"] = n.pass;
        j["norm_scaling"] = o;
    }
    if (scaling_identity) {
        const auto& s = *scaling_identity;
        J o;
        o["points"] = s.points;
        o["checked"] = s.checked;
        o["max_relative_mismatch"] = num(s.max_relative);
        o["tolerance"] = s.tolerance;
        o["pass"] = s.pass;
        j["scaling_identity"] = o;
    }
    if (background_bound) {
        const auto& b = *background_bound;
        J o;
        o["times"] = arr(b.times);
        o["ratio"] = arr(b.ratio);
        o["ratio_at_2x_4t"] = arr(b.scaled_ratio);
        o["spread"] = num(b.spread);
        o["scaling_mismatch"] = num(b.scaling_mismatch);
        o["pass"] = b.pass;
        j["background_bound"] = o;
    }
    j["overall_pass"] = overall_pass;
    return j.dump(2) + "\n";
}

}  // namespace leray::verify
