#include "leray/leray_solver.hpp"

#include "leray/binio.hpp"
#include "leray/parallel.hpp"
#include "leray/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace leray::solver {

namespace {

void require_same(const GridPtr& a, const GridPtr& b, const char* what) {
    if (!a || !b || (a.get() != b.get() && (a->radius() != b->radius() || a->spacing() != b->spacing())))
        throw ValidationError(std::string(what) + ": fields live on different grids");
}

// Velocity value of component d at lattice index idx, 0 at Dirichlet faces.
double val(const VectorField& v, int d, int i, int j, int k) {
    const int id = v.grid->vel_id(d, i, j, k);
    return id < 0 ? 0.0 : v.u(id);
}

// All three components at the centre of face id: the normal one directly,
// the others averaged from the four surrounding faces.
Vec3 face_velocity(const VectorField& v, int id) {
    const auto f = v.grid->faces()[id];
    Vec3 out;
    out(f.d) = v.u(id);
    for (int e = 0; e < 3; ++e) {
        if (e == f.d) continue;
        double s = 0.0;
        for (int side = 0; side < 2; ++side) {
            int c[3] = {f.i, f.j, f.k};
            c[f.d] -= side;  // the two cells sharing the face
            int hi[3] = {c[0], c[1], c[2]};
            hi[e] += 1;
            s += val(v, e, c[0], c[1], c[2]) + val(v, e, hi[0], hi[1], hi[2]);
        }
        out(e) = 0.25 * s;
    }
    return out;
}

// d_e of the component carried by face id.
double face_derivative(const VectorField& v, int id, int e) {
    const auto& g = *v.grid;
    const auto f = g.faces()[id];
    const double h = g.spacing();
    int m[3] = {f.i, f.j, f.k}, p[3] = {f.i, f.j, f.k};
    m[e] -= 1;
    p[e] += 1;
    const int im = g.vel_id(f.d, m[0], m[1], m[2]), ip = g.vel_id(f.d, p[0], p[1], p[2]);
    const double u0 = v.u(id);
    const double um = im < 0 ? 0.0 : v.u(im), up = ip < 0 ? 0.0 : v.u(ip);
    // a missing normal neighbour is a zero face a full cell away
    if (e == f.d || (im >= 0 && ip >= 0)) return (up - um) / (2 * h);
    // tangential: the wall is half a cell away; quadratic through it
    if (im < 0 && ip < 0) return 0.0;
    if (im < 0) return (u0 + up / 3.0) / h;
    return -(u0 + um / 3.0) / h;
}

}  // namespace

std::vector<Vec3> face_points(const HalfBallGrid& g) {
    std::vector<Vec3> pts(g.n_vel());
    for (int id = 0; id < g.n_vel(); ++id) pts[id] = g.face_center(id);
    return pts;
}

Background Background::none(GridPtr g) {
    Background b;
    const std::size_t n = g->n_vel();
    b.grid = std::move(g);
    b.value.assign(n, Vec3::Zero());
    b.grad.assign(n, Mat3::Zero());
    b.linear.assign(n, Vec3::Zero());
    return b;
}

Background Background::from_table(GridPtr g, const propagator::ProfileTable& t) {
    Background b = none(g);
    if (t.is_zero()) return b;
    if (t.extent() < g->radius())
        throw ValidationError("background: profile table smaller than the domain");
    b.zero = false;
    for (int id = 0; id < g->n_vel(); ++id) {
        const auto s = t(g->face_center(id));
        b.value[id] = s.value;
        b.grad[id] = s.grad;
        b.linear[id] = s.linear;
    }
    return b;
}

Background Background::from_field(GridPtr g, const propagator::PropagatedField& f) {
    const std::size_t n = g->n_vel();
    if (f.points.size() != n || f.values.size() != n)
        throw ValidationError("background: field is not sampled at the face centres");
    if (f.gradients.size() != n || f.laplacians.size() != n)
        throw ValidationError("background: F0 assembly needs gradients and Laplacians at every face");
    Background b = none(g);
    for (std::size_t id = 0; id < n; ++id) {
        if ((f.points[id] - g->face_center(int(id))).norm() > 1e-12 * (1 + g->radius()))
            throw ValidationError("background: field is not sampled at the face centres");
        b.value[id] = f.values[id];
        b.grad[id] = f.gradients[id];
        b.linear[id] = f.laplacians[id] + f.values[id] + f.gradients[id] * f.points[id];
        if (!b.value[id].allFinite() || !b.grad[id].allFinite() || !b.linear[id].allFinite())
            throw ValidationError("background: non-finite sample");
        if (b.value[id].squaredNorm() + b.grad[id].squaredNorm() + b.linear[id].squaredNorm() > 0)
            b.zero = false;
    }
    return b;
}

VectorField assemble_F0(const Background& bg) {
    VectorField f(bg.grid);
    if (bg.zero) return f;
    for (int id = 0; id < bg.grid->n_vel(); ++id) {
        const int d = bg.grid->faces()[id].d;
        f.u(id) = bg.linear[id](d) - bg.grad[id].row(d).dot(bg.value[id]);
    }
    return f;
}

VectorField advect_background(const Background& bg, const VectorField& v) {
    require_same(bg.grid, v.grid, "V.grad U0");
    VectorField out(v.grid);
    if (bg.zero) return out;
    for (int id = 0; id < v.grid->n_vel(); ++id) {
        const int d = v.grid->faces()[id].d;
        out.u(id) = bg.grad[id].row(d).dot(face_velocity(v, id));
    }
    return out;
}

VectorField apply_F1(const Background& bg, const VectorField& v) {
    require_same(bg.grid, v.grid, "F1");
    VectorField out(v.grid);
    if (v.u.size() == 0 || v.u.cwiseAbs().maxCoeff() == 0.0) return out;
    for (int id = 0; id < v.grid->n_vel(); ++id) {
        const int d = v.grid->faces()[id].d;
        const Vec3 w = face_velocity(v, id);
        const Vec3 a = bg.value[id] + w;
        double s = 0.0;
        for (int e = 0; e < 3; ++e)
            if (a(e) != 0.0) s += a(e) * face_derivative(v, id, e);
        out.u(id) = -s - bg.grad[id].row(d).dot(w);
    }
    return out;
}

double dirichlet_energy(const VectorField& v) {
    const auto& g = *v.grid;
    const double h = g.spacing();
    double s = 0.0;
    for (int id = 0; id < g.n_vel(); ++id) {
        const auto f = g.faces()[id];
        const double u = v.u(id);
        for (int e = 0; e < 3; ++e) {
            int p[3] = {f.i, f.j, f.k}, m[3] = {f.i, f.j, f.k};
            p[e] += 1;
            m[e] -= 1;
            const int ip = g.vel_id(f.d, p[0], p[1], p[2]);
            if (ip >= 0) {
                const double du = v.u(ip) - u;
                s += du * du;
            } else {
                s += (e == f.d ? 1.0 : 2.0) * u * u;
            }
            if (g.vel_id(f.d, m[0], m[1], m[2]) < 0) s += (e == f.d ? 1.0 : 2.0) * u * u;
        }
    }
    return s * h;  // h^3 * s / h^2
}

double l2_norm_sq(const VectorField& v) { return v.u.squaredNorm() * v.grid->cell_volume(); }

double h1_norm(const VectorField& v) { return std::sqrt(dirichlet_energy(v) + 0.5 * l2_norm_sq(v)); }

double inner(const VectorField& f, const VectorField& g) {
    require_same(f.grid, g.grid, "inner product");
    return f.u.dot(g.u) * f.grid->cell_volume();
}

// ---------------------------------------------------------------------------

std::string checkpoint_name(double radius, double lambda) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "checkpoint_R%g_lambda%.6f.bin", radius, lambda);
    return buf;
}

void save_checkpoint(const std::string& path, const VectorField& v, const ScalarField& p, double lambda) {
    require_same(v.grid, p.grid, "checkpoint");
    const auto& g = *v.grid;
    binio::Writer w;
    w.raw("LERAYV1\0", 8);
    w.f64(g.radius());
    w.f64(g.spacing());
    w.f64(lambda);
    w.u64(std::uint64_t(g.n()));
    w.u64(std::uint64_t(g.n_vel()));
    w.u64(std::uint64_t(g.n_p()));
    w.raw(v.u.data(), sizeof(double) * std::size_t(v.u.size()));
    w.raw(p.p.data(), sizeof(double) * std::size_t(p.p.size()));
    w.save(path);
}

Checkpoint load_checkpoint(const std::string& path) {
    binio::Reader r(path);
    char magic[8];
    r.raw(magic, 8);
    if (std::string(magic, 8) != std::string("LERAYV1\0", 8))
        throw IntegrityError(path + ": not a checkpoint file");
    Checkpoint c;
    const double R = r.f64(), h = r.f64();
    c.lambda = r.f64();
    const auto n = r.u64(), nv = r.u64(), np = r.u64();
    if (!(R > 0) || !(h > 0) || std::abs(R / h - double(n)) > 1e-9 * double(n))
        throw IntegrityError(path + ": inconsistent grid header");
    c.grid = std::make_shared<const HalfBallGrid>(R, h);
    if (std::uint64_t(c.grid->n_vel()) != nv || std::uint64_t(c.grid->n_p()) != np)
        throw IntegrityError(path + ": field sizes do not match the grid");
    c.v = VectorField(c.grid);
    c.p = ScalarField(c.grid);
    r.raw(c.v.u.data(), sizeof(double) * nv);
    r.raw(c.p.p.data(), sizeof(double) * np);
    r.done();
    return c;
}

// ---------------------------------------------------------------------------

namespace {

struct StepOutcome {
    bool ok = false;
    VectorField v;
    ScalarField p;
    StepRecord rec;
    double omega = 0.0;
};

StepOutcome picard_step(const GridPtr& g, const Background& bg, const VectorField& f0, double lambda,
                        const VectorField& start, const ContinuationOptions& opt) {
    StepOutcome out;
    out.rec.lambda = lambda;
    LinearSolver ls(g, lambda, opt.linear);
    auto T = [&](const VectorField& v, VectorField& w, ScalarField& p) {
        VectorField rhs(g);
        if (lambda != 0.0) rhs.u = lambda * (f0.u + apply_F1(bg, v).u);
        out.rec.linear_iterations += ls.solve(rhs, w, p).iterations;
    };
    auto res = [](const VectorField& v, const VectorField& w) {
        VectorField d(w.grid);
        d.u = w.u - v.u;
        const double dn = h1_norm(d), wn = h1_norm(w);
        return dn == 0.0 ? 0.0 : dn / std::max(wn, 1e-300);
    };
    auto& hist = out.rec.residuals;
    double omega = opt.relaxation;
    try {
        VectorField v = start, w;
        ScalarField p;
        T(v, w, p);
        double r = res(v, w);
        hist.push_back(r);
        while (r > opt.tolerance) {
            const int n = int(hist.size());
            if (n > opt.max_picard) {
                out.rec.note = "Picard iteration limit";
                return out;
            }
            if (n > opt.stall_window && hist.back() > 0.99 * hist[n - 1 - opt.stall_window]) {
                out.rec.note = "Picard stall";
                return out;
            }
            VectorField vn(g), wn;
            ScalarField pn;
            vn.u = v.u + omega * (w.u - v.u);
            T(vn, wn, pn);
            const double rn = res(vn, wn);
            if (rn <= r) {
                v = std::move(vn);
                w = std::move(wn);
                p = std::move(pn);
                r = rn;
                hist.push_back(r);
            } else if ((omega *= 0.5) < opt.relaxation / 64) {
                out.rec.note = "no residual-decreasing relaxation";
                return out;
            }
        }
        out.ok = true;
        out.v = std::move(w);
        out.p = std::move(p);
        out.omega = omega;
    } catch (const NumericalError& e) {
        out.rec.note = e.what();
    }
    return out;
}

}  // namespace

ContinuationState leray_continuation(GridPtr g, const Background& bg, const ContinuationOptions& opt) {
    const auto& s = opt.schedule;
    if (s.size() < 2 || s.front() != 0.0 || s.back() != 1.0)
        throw ValidationError("continuation schedule must start at 0 and end at 1");
    for (std::size_t i = 1; i < s.size(); ++i)
        if (!(s[i] > s[i - 1])) throw ValidationError("continuation schedule must increase");
    if (!(opt.tolerance > 0) || !(opt.relaxation > 0 && opt.relaxation <= 1))
        throw ValidationError("continuation: tolerance must be positive and relaxation in (0, 1]");
    require_same(g, bg.grid, "continuation");

    const VectorField f0 = assemble_F0(bg);
    ContinuationState st;
    st.under_relaxation = opt.relaxation;
    auto accept = [&](StepOutcome&& o) {
        st.lambda = o.rec.lambda;
        st.v = std::move(o.v);
        st.p = std::move(o.p);
        st.picard_residuals = o.rec.residuals;
        st.under_relaxation = o.omega;
        o.rec.accepted = true;
        o.rec.h1 = h1_norm(st.v);
        o.rec.energy_residual = verify::energy_identity_residual(st.v, st.lambda, bg, f0);
        st.steps.push_back(std::move(o.rec));
        if (!opt.checkpoint_dir.empty()) {
            std::filesystem::create_directories(opt.checkpoint_dir);
            save_checkpoint((std::filesystem::path(opt.checkpoint_dir) /
                             checkpoint_name(g->radius(), st.lambda)).string(),
                            st.v, st.p, st.lambda);
        }
    };

    // lambda = 0: a linear solve with zero right side
    auto first = picard_step(g, bg, f0, 0.0, VectorField(g), opt);
    if (!first.ok) throw NumericalError("continuation: Stokes solve at lambda = 0 failed", 0.0);
    accept(std::move(first));

    std::size_t next = 1;
    double target = s[1];
    while (true) {
        auto o = picard_step(g, bg, f0, target, st.v, opt);
        if (o.ok) {
            accept(std::move(o));
            if (target == s[next] && ++next == s.size()) break;
            target = s[next];
            continue;
        }
        st.steps.push_back(o.rec);
        const double dl = 0.5 * (target - st.lambda);
        if (dl < opt.min_step) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "continuation failed: increment below %g after lambda = %g (%s)",
                          opt.min_step, st.lambda, o.rec.note.c_str());
            st.message = buf;
            return st;
        }
        target = st.lambda + dl;
    }
    st.complete = true;
    return st;
}

InvadingResult invading_run(const std::vector<double>& radii,
                            const std::function<double(double)>& spacing,
                            const std::function<Background(GridPtr)>& source,
                            const ContinuationOptions& opt, int jobs) {
    if (radii.size() < 3) throw ValidationError("invading run needs at least three radii");
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (!(radii[i] > radii[i - 1])) throw ValidationError("radii must increase strictly");
    InvadingResult res;
    res.runs.resize(radii.size());
    parallel_for(radii.size(), jobs, [&](std::size_t i) {
        auto& r = res.runs[i];
        r.radius = radii[i];
        r.spacing = spacing(radii[i]);
        const auto g = std::make_shared<const HalfBallGrid>(r.radius, r.spacing);
        const auto bg = source(g);
        r.state = leray_continuation(g, bg, opt);
        r.h1 = h1_norm(r.state.v);
        r.energy_residual = r.state.steps.empty() ? 0.0 : r.state.steps.back().energy_residual;
    });
    res.complete = std::all_of(res.runs.begin(), res.runs.end(),
                               [](const RadiusResult& r) { return r.state.complete; });
    const auto& a = res.runs[res.runs.size() - 2];
    const auto& b = res.runs.back();
    if (a.state.complete && b.state.complete) {
        res.final_change = b.h1 == a.h1 ? 0.0 : std::abs(b.h1 - a.h1) / std::max(b.h1, a.h1);
        res.stabilized = res.final_change <= 0.1;
    }
    return res;
}

}  // namespace leray::solver
