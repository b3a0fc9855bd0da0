#include "leray/cli.hpp"

#include "leray/leray_solver.hpp"
#include "leray/verify.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace leray::cli {

namespace fs = std::filesystem;
using J = nlohmann::ordered_json;

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError("config: " + what);
}

bool tol_ok(double t) { return t > 0.0 && t < 0.1; }

J num(double x) { return std::isfinite(x) ? J(x) : J(); }

void write_text(const fs::path& p, const std::string& s) {
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot write " + p.string());
    os << s;
    if (!os) throw IoError("write failed: " + p.string());
}

std::string dump(const J& j) { return j.dump(2) + "\n"; }

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double x) {
    char b[64];
    std::snprintf(b, sizeof b, f, x);
    return b;
}

data::SelfSimilarDatum load_datum(const RunConfig& c) { return data::SelfSimilarDatum::from_spec(c.datum); }

propagator::ProfileTable profile_table(const RunConfig& c, const data::SelfSimilarDatum& d,
                                       std::ostream& log) {
    const double extent = c.radii.back();
    if (d.is_zero()) return propagator::ProfileTable::zero(extent);
    Stopwatch sw;
    auto t = propagator::ProfileTable::cached(d, extent, c.table_quadrature(), c.resolved_cache_dir(), c.jobs,
                                                c.table_step);
    log << "profile table (extent " << extent << "): " << fmt("%.1f s", sw.seconds()) << "\n";
    return t;
}

// Rays on which the decay slopes are fitted: one inside Omega_-, one outside.
std::vector<propagator::RaySamples> decay_rays(const data::SelfSimilarDatum& d, double t,
                                               const propagator::QuadratureSpec& q, int jobs) {
    struct Spec {
        const char* name;
        propagator::Region region;
        Vec3 dir;
    };
    const Spec specs[] = {{"steep", propagator::Region::minus, Vec3(0.5, 0.0, 1.0)},
                          {"shallow", propagator::Region::plus, Vec3(1.0, 0.5, 0.3)}};
    std::vector<propagator::RaySamples> rays;
    for (const auto& s : specs) {
        propagator::RaySamples r;
        r.name = s.name;
        r.region = s.region;
        r.direction = s.dir.normalized();
        const auto pts = propagator::ray_points(s.dir, 5.0, 50.0, 10, &r.s);
        propagator::Options opt;
        opt.derivs = propagator::kGradient;
        opt.jobs = jobs;
        r.field = propagator::propagate_solonnikov(d, t, pts, q, opt);
        rays.push_back(std::move(r));
    }
    return rays;
}

fs::path checkpoint_dir(const RunConfig& c) { return fs::path(c.resolved_output_dir()) / "checkpoints"; }

solver::Checkpoint final_checkpoint(const RunConfig& c, double R) {
    const auto p = checkpoint_dir(c) / solver::checkpoint_name(R, 1.0);
    if (!fs::exists(p))
        throw ValidationError("missing input " + p.string() + " (run `solve` first)");
    return solver::load_checkpoint(p.string());
}

// All checkpoints of radius R, ordered by lambda.
std::vector<std::pair<double, fs::path>> checkpoints_of(const RunConfig& c, double R) {
    std::vector<std::pair<double, fs::path>> out;
    const auto dir = checkpoint_dir(c);
    if (!fs::exists(dir)) return out;
    char prefix[64];
    std::snprintf(prefix, sizeof prefix, "checkpoint_R%g_lambda", R);
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string n = e.path().filename().string();
        if (n.rfind(prefix, 0) != 0 || n.size() < 4 || n.substr(n.size() - 4) != ".bin") continue;
        const std::string l = n.substr(std::string(prefix).size(), n.size() - 4 - std::string(prefix).size());
        out.emplace_back(std::stod(l), e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

double relative_divergence(const solver::VectorField& v) {
    const double m = v.u.size() ? v.u.cwiseAbs().maxCoeff() : 0.0;
    if (m == 0.0) return 0.0;
    return solver::divergence(v).cwiseAbs().maxCoeff() * v.grid->spacing() / m;
}

}  // namespace

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
    require(!datum.empty(), "datum is empty");
    require(time > 0.0 && std::isfinite(time), "time must be positive");
    require(route == "solonnikov" || route == "reflection" || route == "both",
            "route must be solonnikov, reflection or both");
    require(quadrature_points >= 4 && table_points >= 4, "quadrature points must be at least 4");
    require(tol_ok(quadrature_tolerance) && tol_ok(table_tolerance) && tol_ok(kernel_tolerance),
            "quadrature tolerances must lie in (0, 0.1)");
    require(radial_cutoff > 0.0, "radial_cutoff must be positive");
    require(table_step > 0.0 && table_step <= 1.0, "table_step must lie in (0, 1]");
    require(field_extent > 0.0 && field_spacing > 0.0 && field_extent / field_spacing <= 64,
            "field lattice must be positive with at most 64 cells per half width");
    require(radii.size() >= 3, "radii need at least three entries");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        require(radii[i] > 0.0, "radii must be positive");
        if (i) require(radii[i] > radii[i - 1], "radii must increase");
    }
    parse_spacing_rule(spacing_rule);
    require(schedule.size() >= 2 && schedule.front() == 0.0 && schedule.back() == 1.0,
            "schedule must start at 0 and end at 1");
    for (std::size_t i = 1; i < schedule.size(); ++i) require(schedule[i] > schedule[i - 1], "schedule must increase");
    require(tol_ok(picard_tolerance) && tol_ok(projection_tolerance) && tol_ok(linear_tolerance),
            "tolerances must lie in (0, 0.1)");
    require(relaxation > 0.0 && relaxation <= 1.0, "relaxation must lie in (0, 1]");
    require(max_picard >= 1, "max_picard must be positive");
    require(trial_count >= 1, "trial_count must be positive");
    for (const auto* ts : {&norm_times, &bound_times, &reconstruct_times}) {
        require(!ts->empty(), "time lists must not be empty");
        for (double t : *ts) require(t > 0.0, "times must be positive");
    }
    require(norm_times.size() >= 2, "norm_times needs two entries");
    require(only.empty() || std::count(verify_checks().begin(), verify_checks().end(), only) == 1,
            "unknown check '" + only + "'");
    require(jobs >= 1, "jobs must be positive");
}

propagator::QuadratureSpec RunConfig::quadrature() const {
    propagator::QuadratureSpec q;
    q.points_per_dim = quadrature_points;
    q.tolerance = quadrature_tolerance;
    q.radial_cutoff = radial_cutoff;
    return q;
}

propagator::QuadratureSpec RunConfig::table_quadrature() const {
    propagator::QuadratureSpec q;
    q.points_per_dim = table_points;
    q.tolerance = table_tolerance;
    q.radial_cutoff = radial_cutoff;
    return q;
}

std::string RunConfig::resolved_output_dir() const {
    if (!output_dir.empty()) return output_dir;
    if (const char* e = std::getenv("LERAY_OUTPUT_DIR"); e && *e) return e;
    return "leray_out";
}

std::string RunConfig::resolved_cache_dir() const {
    return cache_dir.empty() ? (fs::path(resolved_output_dir()) / "cache").string() : cache_dir;
}

std::function<double(double)> parse_spacing_rule(const std::string& rule) {
    std::string r;
    for (char ch : rule)
        if (ch != ' ') r += ch;
    auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size() || !(v > 0.0) || !std::isfinite(v))
            throw ValidationError("config: bad spacing rule '" + rule + "'");
        return v;
    };
    if (r.rfind("R/", 0) == 0) {
        const double n = number(r.substr(2));
        return [n](double R) { return R / n; };
    }
    if (r.size() > 2 && r.substr(r.size() - 2) == "*R") {
        const double a = number(r.substr(0, r.size() - 2));
        return [a](double R) { return a * R; };
    }
    const double h = number(r);
    return [h](double) { return h; };
}

const std::vector<std::string>& verify_checks() {
    static const std::vector<std::string> v{"assumption31", "energy",          "decay",
                                            "norm_scaling", "scaling_identity", "background_bound"};
    return v;
}

// ---------------------------------------------------------------------------

int cmd_propagate(const RunConfig& c, std::ostream& log) {
    c.validate();
    const auto d = load_datum(c);
    const auto q = c.quadrature();
    const fs::path out = c.resolved_output_dir();

    std::vector<Vec3> pts;
    const int m = int(std::lround(c.field_extent / c.field_spacing));
    for (int k = 0; k <= m; ++k)
        for (int j = -m; j <= m; ++j)
            for (int i = -m; i <= m; ++i)
                pts.emplace_back(i * c.field_spacing, j * c.field_spacing, k * c.field_spacing);

    propagator::Options opt;
    opt.jobs = c.jobs;
    Stopwatch sw;
    J rep;
    rep["schema"] = "propagate-v1";
    rep["datum"] = c.datum;
    rep["t"] = c.time;
    rep["route"] = c.route;
    rep["quadrature"] = {{"points_per_dim", q.points_per_dim}, {"tolerance", q.tolerance},
                         {"radial_cutoff", q.radial_cutoff}};
    rep["field_points"] = pts.size();

    propagator::PropagatedField main;
    if (c.route == "reflection") {
        main = propagator::propagate_reflection(d, c.time, pts, q, opt);
    } else {
        main = propagator::propagate_solonnikov(d, c.time, pts, q, opt);
    }
    fs::create_directories(out);
    propagator::write_csv(main, (out / "u0_field.csv").string());
    rep["quadrature_error_estimate"] = num(main.quadrature_error_estimate);
    log << "field (" << pts.size() << " points, " << propagator::route_name(main.route)
        << "): " << fmt("%.1f s", sw.seconds()) << "\n";

    if (c.route == "both") {
        const auto other = propagator::propagate_reflection(d, c.time, pts, q, opt);
        propagator::write_csv(other, (out / "u0_field_reflection.csv").string());
        double num2 = 0, den2 = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            num2 += (main.values[i] - other.values[i]).squaredNorm();
            den2 += main.values[i].squaredNorm();
        }
        const double rel = den2 == 0.0 ? std::sqrt(num2) : std::sqrt(num2 / den2);
        rep["cross_route"] = {{"relative_l2", num(rel)}, {"tolerance", 0.02}, {"pass", rel <= 0.02}};
        log << "cross-route relative L2 difference: " << fmt("%.3e", rel) << "\n";
    }

    bool trivial = d.is_zero();
    if (!trivial) {
        const auto rays = decay_rays(d, c.time, q, c.jobs);
        const auto dr = propagator::decay_report(rays);
        trivial = dr.trivial;
        rep["decay"] = J::parse(dr.to_json());
    }
    rep["trivial"] = trivial;
    write_text(out / "decay_report.json", dump(rep));
    log << "wrote " << (out / "u0_field.csv").string() << " and decay_report.json\n";
    return kOk;
}

int cmd_solve(const RunConfig& c, std::ostream& log) {
    c.validate();
    const auto d = load_datum(c);
    const fs::path out = c.resolved_output_dir();
    const auto table = profile_table(c, d, log);

    solver::ContinuationOptions opt;
    opt.schedule = c.schedule;
    opt.tolerance = c.picard_tolerance;
    opt.relaxation = c.relaxation;
    opt.max_picard = c.max_picard;
    opt.linear.tolerance = c.linear_tolerance;
    opt.checkpoint_dir = (out / "checkpoints").string();

    Stopwatch sw;
    const auto rule = parse_spacing_rule(c.spacing_rule);
    solver::InvadingResult res;
    try {
        res = solver::invading_run(
            c.radii, rule, [&](solver::GridPtr g) { return solver::Background::from_table(g, table); }, opt,
            c.jobs);
    } catch (const NumericalError& e) {
        throw ContinuationError(e.what());  // a linear solve inside the continuation failed
    }
    log << "invading run: " << fmt("%.1f s", sw.seconds()) << "\n";

    J runs = J::array();
    bool divergence_ok = true;
    for (const auto& r : res.runs) {
        J steps = J::array();
        for (const auto& s : r.state.steps) {
            J o;
            o["lambda"] = s.lambda;
            o["accepted"] = s.accepted;
            o["picard_iterations"] = s.residuals.size();
            o["final_residual"] = s.residuals.empty() ? J() : num(s.residuals.back());
            o["linear_iterations"] = s.linear_iterations;
            if (s.accepted) {
                o["h1"] = num(s.h1);
                o["energy_residual"] = num(s.energy_residual);
            }
            if (!s.note.empty()) o["note"] = s.note;
            steps.push_back(o);
        }
        const double div = r.state.v.grid ? relative_divergence(r.state.v) : 0.0;
        divergence_ok = divergence_ok && div <= c.projection_tolerance;
        J o;
        o["radius"] = r.radius;
        o["spacing"] = r.spacing;
        o["complete"] = r.state.complete;
        o["lambda"] = r.state.lambda;
        o["h1"] = num(r.h1);
        o["energy_residual"] = num(r.energy_residual);
        o["relative_divergence"] = num(div);
        o["under_relaxation"] = r.state.under_relaxation;
        if (!r.state.message.empty()) o["message"] = r.state.message;
        o["steps"] = steps;
        runs.push_back(o);
        log << "R = " << r.radius << ": H1 = " << fmt("%.6e", r.h1)
            << ", energy residual " << fmt("%.3e", r.energy_residual)
            << (r.state.complete ? "" : "  [incomplete: " + r.state.message + "]") << "\n";
    }
    J rep;
    rep["schema"] = "solve-v1";
    rep["datum"] = c.datum;
    rep["radii"] = c.radii;
    rep["spacing_rule"] = c.spacing_rule;
    rep["schedule"] = c.schedule;
    rep["picard_tolerance"] = c.picard_tolerance;
    rep["projection_tolerance"] = c.projection_tolerance;
    rep["relaxation"] = c.relaxation;
    rep["runs"] = runs;
    rep["complete"] = res.complete;
    rep["divergence_within_tolerance"] = divergence_ok;
    rep["final_relative_change"] = num(res.final_change);
    rep["stabilization_threshold"] = 0.1;
    rep["stabilized"] = res.stabilized;
    write_text(out / "invading_summary.json", dump(rep));
    log << "final relative change " << fmt("%.4f", res.final_change)
        << (res.stabilized ? " (stabilized)" : " (not stabilized at 10%)") << "\n";
    return res.complete ? kOk : kContinuation;
}

int cmd_verify(const RunConfig& c, std::ostream& log) {
    c.validate();
    const auto d = load_datum(c);
    const fs::path out = c.resolved_output_dir();
    auto wanted = [&](const char* name) { return c.only.empty() || c.only == name; };
    const double Rmax = c.radii.back();

    verify::DiagnosticsReport rep;
    rep.seed = c.seed;

    // inputs shared by several checks, loaded on first use
    std::optional<solver::Checkpoint> final_ck;
    auto final_v = [&]() -> const solver::Checkpoint& {
        if (!final_ck) final_ck = final_checkpoint(c, Rmax);
        return *final_ck;
    };
    std::optional<propagator::ProfileTable> table;
    auto tab = [&]() -> const propagator::ProfileTable& {
        if (!table) table = profile_table(c, d, log);
        return *table;
    };
    std::optional<propagator::DecayReport> decay;
    auto decay_rep = [&]() -> const propagator::DecayReport& {
        if (!decay) {
            Stopwatch sw;
            decay = d.is_zero() ? [] {
                propagator::DecayReport r;
                r.trivial = true;
                r.pass = true;
                return r;
            }()
                                : propagator::decay_report(decay_rays(d, c.time, c.quadrature(), c.jobs));
            log << "decay fits: " << fmt("%.1f s", sw.seconds()) << "\n";
        }
        return *decay;
    };

    if (wanted("energy")) {
        Stopwatch sw;
        final_v();  // the final state must exist
        for (double R : c.radii) {
            const auto cks = checkpoints_of(c, R);
            if (cks.empty()) throw ValidationError("missing checkpoints for R = " + fmt("%g", R));
            for (const auto& [lambda, path] : cks) {
                const auto ck = solver::load_checkpoint(path.string());
                const auto bg = solver::Background::from_table(ck.grid, tab());
                const double r = verify::energy_identity_residual(ck.v, ck.lambda, bg, solver::assemble_F0(bg));
                rep.energy_identity_residuals.push_back({ck.lambda, R, ck.grid->spacing(), r});
            }
        }
        log << "energy identity: " << fmt("%.1f s", sw.seconds()) << "\n";
    }
    if (wanted("decay")) rep.decay = decay_rep();
    if (wanted("assumption31")) {
        Stopwatch sw;
        verify::Assumption31Options o;
        o.trial_count = c.trial_count;
        o.seed = c.seed;
        o.radii.clear();
        for (double R : c.radii)
            if (R <= tab().extent()) o.radii.push_back(R);
        const auto& dr = decay_rep();
        // the slowest fitted decay of each quantity bounds the tails
        auto slowest = [&](const char* q) -> std::optional<double> {
            std::optional<double> s;
            for (const auto& f : dr.fits) {
                if (f.quantity != q) continue;
                if (!f.fitted) return std::nullopt;
                s = s ? std::max(*s, f.slope) : f.slope;
            }
            return s;
        };
        if (!dr.trivial) {
            o.value_slope = slowest("abs_U0");
            o.grad_slope = slowest("abs_grad_U0");
        }
        const auto g = std::make_shared<const solver::HalfBallGrid>(Rmax, parse_spacing_rule(c.spacing_rule)(Rmax));
        rep.assumption31 = verify::assumption31_check(tab(), solver::Background::from_table(g, tab()), o);
        log << "assumption check: " << fmt("%.1f s", sw.seconds()) << "\n";
    }
    if (wanted("norm_scaling")) {
        Stopwatch sw;
        rep.norm_scaling = verify::norm_scaling_check(final_v().v, c.norm_times);
        log << "norm scaling: " << fmt("%.1f s", sw.seconds()) << "\n";
    }
    if (wanted("scaling_identity")) {
        const auto U = verify::solved_profile(&tab(), final_v().v);
        rep.scaling_identity = verify::scaling_identity_check(U, Rmax, 100, c.seed);
    }
    if (wanted("background_bound")) {
        Stopwatch sw;
        rep.background_bound =
            verify::background_bound_check(d, verify::bound_samples(), c.bound_times, c.quadrature(), c.jobs);
        log << "background bound: " << fmt("%.1f s", sw.seconds()) << "\n";
    }
    rep.finalize();
    write_text(out / "verify_report.json", rep.to_json());
    log << "wrote " << (out / "verify_report.json").string() << "; overall_pass "
        << (rep.overall_pass ? "true" : "false") << "\n";
    return kOk;
}

int cmd_reconstruct(const RunConfig& c, std::ostream& log) {
    c.validate();
    const auto d = load_datum(c);
    const fs::path out = c.resolved_output_dir();
    const double R = c.radii.back();
    const auto ck = final_checkpoint(c, R);
    const auto table = profile_table(c, d, log);
    const auto U = verify::solved_profile(&table, ck.v);

    fs::create_directories(out);
    std::ofstream os(out / "reconstruction.csv");
    if (!os) throw IoError("cannot write reconstruction.csv");
    os << "t,x1,x2,x3,u1,u2,u3\n";
    const int m = 8;
    const double step = R / m;
    char buf[256];
    std::size_t rows = 0;
    for (double t : c.reconstruct_times) {
        const double s = std::sqrt(2 * t);
        for (int k = 0; k <= m; ++k)
            for (int j = -m; j <= m; ++j)
                for (int i = -m; i <= m; ++i) {
                    const Vec3 y(i * step, j * step, k * step);
                    if (y.norm() > R) continue;
                    const Vec3 x = s * y;
                    const Vec3 u = verify::reconstruct(U, t, x);
                    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%.12g,%.12g,%.12g\n", t, x(0),
                                  x(1), x(2), u(0), u(1), u(2));
                    os << buf;
                    ++rows;
                }
    }
    if (!os) throw IoError("write failed: reconstruction.csv");
    const auto si = verify::scaling_identity_check(U, R, 100, c.seed);
    log << "wrote " << rows << " rows to " << (out / "reconstruction.csv").string()
        << "; scaling identity max relative mismatch " << fmt("%.2e", si.max_relative) << "\n";
    return kOk;
}

int cmd_kernels(const RunConfig& c, std::ostream& log) {
    c.validate();
    const fs::path out = c.resolved_output_dir();
    auto q = c.quadrature();
    q.tolerance = c.kernel_tolerance;
    fs::create_directories(out);
    std::ofstream os(out / "kernels.csv");
    if (!os) throw IoError("cannot write kernels.csv");
    os << "kernel,index,x1,x2,x3,t,value,err_est\n";
    char buf[256];
    auto row = [&](const char* k, const std::string& idx, const Vec3& x, double t, double v, double err) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%.10g,%.10g,%.10g,%.14g,%.3g\n", k, idx.c_str(), x(0), x(1),
                      x(2), t, v, err);
        os << buf;
    };
    const Vec3 dir = Vec3(1, 1, 1).normalized();
    for (double t : {0.25, 0.5, 1.0})
        for (int i = 0; i <= 40; ++i) {
            const Vec3 x = 0.1 * i * dir;
            row("heat", "", x, t, kernels::heat_kernel(x, t), 0.0);
            for (int k = 0; k < 3; ++k) {
                std::array<int, 3> a{0, 0, 0};
                a[k] = 1;
                row("heat_d", std::to_string(k + 1), x, t, kernels::heat_kernel_deriv(x, t, a), 0.0);
            }
        }
    // G*(x, y, 1/2) with the pole y = (0, 0, 1/2), x moving away from it over two decades
    const Vec3 y(0, 0, 0.5), ray = Vec3(1, 0, 1).normalized();
    for (int n = 0; n <= 16; ++n) {
        const Vec3 x = y + std::pow(10.0, 0.125 * n) * ray;
        for (int i = 1; i <= 3; ++i)
            for (int j = 1; j <= 2; ++j) {
                const auto e = kernels::gstar_estimate(i, j, x, y, 0.5, q);
                row("gstar", std::to_string(i) + std::to_string(j), x, 0.5, e.value, e.error);
            }
    }
    if (!os) throw IoError("write failed: kernels.csv");
    log << "wrote " << (out / "kernels.csv").string() << "\n";
    return kOk;
}

int cmd_report(const std::string& path, std::ostream& out) {
    std::ifstream is(path);
    if (!is) throw ValidationError("missing input " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    J j;
    try {
        j = J::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(path + ": not valid JSON (" + e.what() + ")");
    }
    out << j.dump(2) << "\n";
    return kOk;
}

int run_guarded(const std::function<int()>& f, std::ostream& err) {
    try {
        return f();
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kQuadrature;
    } catch (const ContinuationError& e) {
        err << "continuation error: " << e.what() << "\n";
        return kContinuation;
    } catch (const IntegrityError& e) {
        err << "integrity error: " << e.what() << "\n";
        return kIntegrity;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kIntegrity;
    } catch (const fs::filesystem_error& e) {
        err << "i/o error: " << e.what() << "\n";
        return kIntegrity;
    }
}

}  // namespace leray::cli
