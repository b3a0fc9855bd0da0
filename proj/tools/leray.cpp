#include "leray/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>

using leray::cli::RunConfig;

namespace {

// Options every pipeline subcommand understands; the names double as config
// file keys (with '-' or '_').
void add_common(CLI::App* s, RunConfig& c, std::string& config) {
    s->add_option("--config", config, "key = value file; flags given on the command line win");
    s->add_option("--datum", c.datum, "catalog name (zero, swirl, poloidal), <eps>*<name>, or CSV path")
        ->capture_default_str();
    s->add_option("--output-dir", c.output_dir, "output root (default: $LERAY_OUTPUT_DIR, else leray_out)");
    s->add_option("--cache-dir", c.cache_dir, "profile table cache (default: <output-dir>/cache)");
    s->add_option("--jobs", c.jobs, "worker threads")->capture_default_str();
    s->add_option("--seed", c.seed, "seed of every random choice")->capture_default_str();
    s->add_option("--quadrature-points", c.quadrature_points, "quadrature points per dimension")
        ->capture_default_str();
    s->add_option("--quadrature-tolerance", c.quadrature_tolerance, "relative quadrature tolerance")
        ->capture_default_str();
    s->add_option("--radial-cutoff", c.radial_cutoff, "truncation radius of plane integrals")
        ->capture_default_str();
}

void add_solver(CLI::App* s, RunConfig& c) {
    s->add_option("--radii", c.radii, "increasing radii of the invading half balls")
        ->delimiter(',')
        ->capture_default_str();
    s->add_option("--spacing-rule", c.spacing_rule, "grid spacing h(R): R/<n>, <a>*R or a constant")
        ->capture_default_str();
    s->add_option("--table-points", c.table_points, "quadrature points of the profile table")
        ->capture_default_str();
    s->add_option("--table-tolerance", c.table_tolerance, "quadrature tolerance of the profile table")
        ->capture_default_str();
    s->add_option("--table-step", c.table_step, "node step of the profile table in asinh coordinates")
        ->capture_default_str();
}

void add_continuation(CLI::App* s, RunConfig& c) {
    s->add_option("--schedule", c.schedule, "lambda steps, from 0 to 1")->delimiter(',')->capture_default_str();
    s->add_option("--picard-tolerance", c.picard_tolerance, "relative H1 size of the last Picard update")
        ->capture_default_str();
    s->add_option("--projection-tolerance", c.projection_tolerance,
                  "allowed relative discrete divergence of the final V")
        ->capture_default_str();
    s->add_option("--linear-tolerance", c.linear_tolerance, "relative residual of each linear solve")
        ->capture_default_str();
    s->add_option("--relaxation", c.relaxation, "Picard under-relaxation")->capture_default_str();
    s->add_option("--max-picard", c.max_picard, "Picard iterations allowed per lambda step")->capture_default_str();
}

std::string key_of(std::string k) {
    for (auto& ch : k)
        if (ch == '_') ch = '-';
    return k;
}

// Applies the config file to the options of s not given on the command line.
// A key no subcommand knows is an error; keys of other subcommands are skipped.
void apply_config(CLI::App& app, CLI::App* s, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw leray::ValidationError("cannot read config file " + path);
    std::set<std::string> known;
    for (const auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        for (const auto* o : sub->get_options())
            if (!o->get_lnames().empty()) known.insert(o->get_lnames().front());
    std::string line;
    int no = 0;
    while (std::getline(is, line)) {
        ++no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = CLI::detail::trim_copy(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw leray::ValidationError(path + ":" + std::to_string(no) + ": expected key = value");
        const std::string k = key_of(CLI::detail::trim_copy(line.substr(0, eq)));
        const std::string v = CLI::detail::trim_copy(line.substr(eq + 1));
        if (!known.count(k))
            throw leray::ValidationError(path + ":" + std::to_string(no) + ": unknown key '" + k + "'");
        if (k == "config") continue;
        CLI::Option* o = s->get_option_no_throw("--" + k);
        if (!o || o->count() > 0) continue;
        try {
            o->add_result(v);
            o->run_callback();
        } catch (const CLI::Error& e) {
            throw leray::ValidationError(path + ":" + std::to_string(no) + ": " + e.what());
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-similar half-space Navier-Stokes solutions: profile, correction, checks"};
    app.require_subcommand(1);
    RunConfig c;
    std::string config, report_path;

    auto* prop = app.add_subcommand("propagate", "Stokes-propagated profile U0: field dump and decay fits");
    add_common(prop, c, config);
    prop->add_option("--t", c.time, "time")->capture_default_str();
    prop->add_option("--route", c.route, "solonnikov, reflection or both (adds the cross-route check)")
        ->check(CLI::IsMember({"solonnikov", "reflection", "both"}))
        ->capture_default_str();
    prop->add_option("--field-extent", c.field_extent, "half width of the dumped lattice")->capture_default_str();
    prop->add_option("--field-spacing", c.field_spacing, "lattice spacing of the dump")->capture_default_str();

    auto* solve = app.add_subcommand("solve", "Correction V on invading half balls by lambda continuation");
    add_common(solve, c, config);
    add_solver(solve, c);
    add_continuation(solve, c);

    auto* ver = app.add_subcommand("verify", "Checks on the propagated profile and the solved correction");
    add_common(ver, c, config);
    add_solver(ver, c);
    ver->add_option("--t", c.time, "time of the decay fits")->capture_default_str();
    ver->add_option("--only", c.only, "run a single check")->check(CLI::IsMember(leray::cli::verify_checks()));
    ver->add_option("--trial-count", c.trial_count, "random trial fields for the weak bounds")
        ->capture_default_str();
    ver->add_option("--norm-times", c.norm_times, "times of the norm scaling fit")
        ->delimiter(',')
        ->capture_default_str();
    ver->add_option("--bound-times", c.bound_times, "times of the background bound")
        ->delimiter(',')
        ->capture_default_str();

    auto* rec = app.add_subcommand("reconstruct", "u(x, t) from U0 + V on the largest half ball");
    add_common(rec, c, config);
    add_solver(rec, c);
    rec->add_option("--times", c.reconstruct_times, "times to tabulate")->delimiter(',')->capture_default_str();

    auto* ker = app.add_subcommand("kernels", "Tabulate the heat kernel and G* to CSV");
    add_common(ker, c, config);
    ker->add_option("--kernel-tolerance", c.kernel_tolerance, "relative quadrature tolerance of G*")
        ->capture_default_str();

    auto* rep = app.add_subcommand("report", "Pretty-print a JSON report");
    rep->add_option("path", report_path, "report file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : leray::cli::kConfig;
    }

    CLI::App* active = app.get_subcommands().front();
    return leray::cli::run_guarded(
        [&]() -> int {
            if (!config.empty()) apply_config(app, active, config);
            if (active == prop) return leray::cli::cmd_propagate(c, std::cout);
            if (active == solve) return leray::cli::cmd_solve(c, std::cout);
            if (active == ver) return leray::cli::cmd_verify(c, std::cout);
            if (active == rec) return leray::cli::cmd_reconstruct(c, std::cout);
            if (active == ker) return leray::cli::cmd_kernels(c, std::cout);
            return leray::cli::cmd_report(report_path, std::cout);
        },
        std::cerr);
}
