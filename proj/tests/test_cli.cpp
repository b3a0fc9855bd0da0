#include "doctest.h"

#include "leray/cli.hpp"
#include "leray/leray_solver.hpp"

#include <json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace leray;
using leray::cli::RunConfig;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("leray_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

int lines(const fs::path& p) {
    std::ifstream is(p);
    std::string l;
    int n = 0;
    while (std::getline(is, l)) ++n;
    return n;
}

// A cheap swirl pipeline: small radii, coarse table and quadrature.
RunConfig small(const std::string& out, const std::string& cache) {
    RunConfig c;
    c.datum = "swirl";
    c.radii = {2.0, 3.0, 4.0};
    c.spacing_rule = "R/12";
    c.table_points = 12;
    c.table_tolerance = 1e-3;
    c.table_step = 0.3;
    c.quadrature_points = 16;
    c.quadrature_tolerance = 1e-4;
    c.field_extent = 2.0;
    c.output_dir = out;
    c.cache_dir = cache;
    return c;
}

int run(const std::function<int()>& f) {
    std::ostringstream err;
    const int rc = cli::run_guarded(f, err);
    if (rc) MESSAGE(err.str());
    return rc;
}

struct Pipeline {
    std::string a, b, cache;
    int solve_a = -1, solve_b = -1, verify_a = -1, verify_b = -1;
};

// Two identical solve + verify runs sharing one table cache, run once.
const Pipeline& pipeline() {
    static const Pipeline p = [] {
        Pipeline r;
        r.cache = temp_dir("cache");
        r.a = temp_dir("run_a");
        r.b = temp_dir("run_b");
        std::ostringstream log;
        r.solve_a = run([&] { return cli::cmd_solve(small(r.a, r.cache), log); });
        r.solve_b = run([&] { return cli::cmd_solve(small(r.b, r.cache), log); });
        r.verify_a = run([&] { return cli::cmd_verify(small(r.a, r.cache), log); });
        r.verify_b = run([&] { return cli::cmd_verify(small(r.b, r.cache), log); });
        return r;
    }();
    return p;
}

struct Spawned {
    int status;
    std::string out;
};

Spawned spawn(const std::string& args) {
    const std::string cmd = std::string(LERAY_TOOL_PATH) + " " + args + " 2>&1";
    FILE* f = popen(cmd.c_str(), "r");
    REQUIRE(f);
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, f)) out.append(buf, n);
    const int st = pclose(f);
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

}  // namespace

TEST_CASE("spacing rules") {
    CHECK(cli::parse_spacing_rule("R/24")(6.0) == doctest::Approx(0.25));
    CHECK(cli::parse_spacing_rule("0.05*R")(8.0) == doctest::Approx(0.4));
    CHECK(cli::parse_spacing_rule(" 0.25 ")(100.0) == 0.25);
    for (const char* bad : {"", "R/0", "R/", "abc", "-1", "2*X", "R/3x"})
        CHECK_THROWS_AS(cli::parse_spacing_rule(bad), ValidationError);
}

TEST_CASE("config validation maps to exit code 2") {
    CHECK_NOTHROW(RunConfig{}.validate());
    std::vector<std::function<void(RunConfig&)>> breakers = {
        [](RunConfig& c) { c.radii = {4, 8}; },
        [](RunConfig& c) { c.radii = {4, 8, 6}; },
        [](RunConfig& c) { c.schedule = {0, 0.5}; },
        [](RunConfig& c) { c.schedule = {0, 0.5, 0.4, 1}; },
        [](RunConfig& c) { c.picard_tolerance = 0.1; },
        [](RunConfig& c) { c.linear_tolerance = 0.0; },
        [](RunConfig& c) { c.quadrature_tolerance = 0.5; },
        [](RunConfig& c) { c.time = -1; },
        [](RunConfig& c) { c.route = "sideways"; },
        [](RunConfig& c) { c.spacing_rule = "fine"; },
        [](RunConfig& c) { c.only = "everything"; },
        [](RunConfig& c) { c.jobs = 0; },
    };
    const std::string out = temp_dir("invalid");
    for (auto& b : breakers) {
        RunConfig c;
        c.output_dir = out;
        b(c);
        CHECK_THROWS_AS(c.validate(), ValidationError);
        std::ostringstream log, err;
        CHECK(cli::run_guarded([&] { return cli::cmd_propagate(c, log); }, err) == cli::kConfig);
        CHECK(err.str().find("config:") != std::string::npos);
    }
    CHECK(fs::is_empty(out));
    RunConfig c;
    c.datum = "no_such_datum";
    c.output_dir = out;
    std::ostringstream log;
    CHECK(run([&] { return cli::cmd_propagate(c, log); }) == cli::kConfig);
}

TEST_CASE("output root: flag, environment, default") {
    RunConfig c;
    ::unsetenv("LERAY_OUTPUT_DIR");
    CHECK(c.resolved_output_dir() == "leray_out");
    ::setenv("LERAY_OUTPUT_DIR", "/tmp/somewhere", 1);
    CHECK(c.resolved_output_dir() == "/tmp/somewhere");
    CHECK(c.resolved_cache_dir() == "/tmp/somewhere/cache");
    c.output_dir = "mine";
    CHECK(c.resolved_output_dir() == "mine");
    ::unsetenv("LERAY_OUTPUT_DIR");
}

TEST_CASE("propagate: zero datum is trivial") {
    auto c = small(temp_dir("prop_zero"), "");
    c.datum = "zero";
    std::ostringstream log;
    REQUIRE(run([&] { return cli::cmd_propagate(c, log); }) == 0);
    const auto rep = read_json(fs::path(c.output_dir) / "decay_report.json");
    CHECK(rep["schema"] == "propagate-v1");
    CHECK(rep["trivial"] == true);
    std::ifstream is(fs::path(c.output_dir) / "u0_field.csv");
    std::string line;
    std::getline(is, line);
    CHECK(line == "x1,x2,x3,v1,v2,v3,err_est");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        double x[7];
        char sep;
        std::istringstream ls(line);
        ls >> x[0];
        for (int k = 1; k < 7; ++k) ls >> sep >> x[k];
        CHECK(x[3] == 0.0);
        CHECK(x[4] == 0.0);
        CHECK(x[5] == 0.0);
    }
    CHECK(rows == 5 * 5 * 3);
}

TEST_CASE("propagate: swirl with both routes") {
    auto c = small(temp_dir("prop_swirl"), "");
    c.route = "both";
    std::ostringstream log;
    REQUIRE(run([&] { return cli::cmd_propagate(c, log); }) == 0);
    const fs::path out = c.output_dir;
    CHECK(fs::exists(out / "u0_field.csv"));
    CHECK(fs::exists(out / "u0_field_reflection.csv"));
    CHECK(lines(out / "u0_field.csv") == 76);
    const auto rep = read_json(out / "decay_report.json");
    CHECK(rep["trivial"] == false);
    CHECK(rep["cross_route"]["relative_l2"].get<double>() <= 0.02);
    CHECK(rep["cross_route"]["pass"] == true);
    CHECK(rep["decay"]["fits"].size() > 0);
    // nothing outside the output root
    for (const auto& e : fs::recursive_directory_iterator(out)) CHECK(e.path().string().rfind(out.string(), 0) == 0);
}

TEST_CASE("kernels: tabulation, and quadrature failure maps to exit code 3") {
    RunConfig c;
    c.output_dir = temp_dir("kernels");
    std::ostringstream log;
    REQUIRE(run([&] { return cli::cmd_kernels(c, log); }) == 0);
    const fs::path csv = fs::path(c.output_dir) / "kernels.csv";
    CHECK(lines(csv) == 1 + 3 * 41 * 4 + 17 * 6);
    std::ifstream is(csv);
    std::string head;
    std::getline(is, head);
    CHECK(head == "kernel,index,x1,x2,x3,t,value,err_est");

    c.kernel_tolerance = 1e-9;  // beyond what 32 points resolve next to the pole
    std::ostringstream err;
    CHECK(cli::run_guarded([&] { return cli::cmd_kernels(c, log); }, err) == cli::kQuadrature);
    CHECK(err.str().find("numerical error") != std::string::npos);
}

TEST_CASE("solve: zero datum gives V = 0") {
    auto c = small(temp_dir("solve_zero"), "");
    c.datum = "zero";
    std::ostringstream log;
    REQUIRE(run([&] { return cli::cmd_solve(c, log); }) == 0);
    const auto rep = read_json(fs::path(c.output_dir) / "invading_summary.json");
    CHECK(rep["complete"] == true);
    for (const auto& r : rep["runs"]) CHECK(r["h1"].get<double>() == 0.0);
    const auto ck = solver::load_checkpoint(
        (fs::path(c.output_dir) / "checkpoints" / solver::checkpoint_name(4.0, 1.0)).string());
    CHECK(ck.v.u.cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(fs::exists(fs::path(c.output_dir) / "cache"));
}

TEST_CASE("solve: continuation failure maps to exit code 4 and keeps outputs") {
    auto c = small(temp_dir("solve_fail"), temp_dir("solve_fail_cache"));
    c.radii = {1.0, 1.5, 2.0};
    c.spacing_rule = "R/8";
    c.max_picard = 2;
    c.picard_tolerance = 1e-14;
    std::ostringstream log;
    CHECK(run([&] { return cli::cmd_solve(c, log); }) == cli::kContinuation);
    const fs::path out = c.output_dir;
    const auto rep = read_json(out / "invading_summary.json");
    CHECK(rep["complete"] == false);
    CHECK(rep["runs"][0]["message"].get<std::string>().find("continuation failed") != std::string::npos);
    CHECK(fs::exists(out / "checkpoints" / solver::checkpoint_name(1.0, 0.0)));
}

TEST_CASE("solve + verify: swirl pipeline") {
    const auto& p = pipeline();
    REQUIRE(p.solve_a == 0);
    REQUIRE(p.verify_a == 0);
    const auto s = read_json(fs::path(p.a) / "invading_summary.json");
    CHECK(s["schema"] == "solve-v1");
    CHECK(s["complete"] == true);
    CHECK(s["divergence_within_tolerance"] == true);
    REQUIRE(s["runs"].size() == 3);
    for (const auto& r : s["runs"]) {
        CHECK(r["complete"] == true);
        CHECK(r["h1"].get<double>() > 0.0);
        CHECK(r["steps"].size() >= 5);
    }
    for (double R : {2.0, 3.0, 4.0})
        for (double l : {0.0, 0.25, 0.5, 0.75, 1.0})
            CHECK(fs::exists(fs::path(p.a) / "checkpoints" / solver::checkpoint_name(R, l)));

    const auto v = read_json(fs::path(p.a) / "verify_report.json");
    CHECK(v["schema"] == "verify-v1");
    for (const char* k : {"assumption31", "decay_fits", "norm_scaling", "scaling_identity", "background_bound"})
        CHECK(v.contains(k));
    CHECK(v["energy_identity_residuals"].size() == 15);
    CHECK(v["scaling_identity"]["pass"] == true);
    CHECK(v.contains("overall_pass"));
}

TEST_CASE("determinism: repeated runs are byte-identical") {
    const auto& p = pipeline();
    REQUIRE(p.solve_b == 0);
    REQUIRE(p.verify_b == 0);
    for (const char* f : {"invading_summary.json", "verify_report.json"}) {
        const std::string a = slurp(fs::path(p.a) / f), b = slurp(fs::path(p.b) / f);
        CHECK(!a.empty());
        CHECK(a == b);
    }
    const auto name = solver::checkpoint_name(4.0, 1.0);
    CHECK(slurp(fs::path(p.a) / "checkpoints" / name) == slurp(fs::path(p.b) / "checkpoints" / name));
}

TEST_CASE("verify --only energy") {
    const auto& p = pipeline();
    REQUIRE(p.solve_a == 0);
    auto c = small(temp_dir("only"), p.cache);
    fs::copy(fs::path(p.a) / "checkpoints", fs::path(c.output_dir) / "checkpoints");
    c.only = "energy";
    std::ostringstream log;
    REQUIRE(run([&] { return cli::cmd_verify(c, log); }) == 0);
    const auto v = read_json(fs::path(c.output_dir) / "verify_report.json");
    CHECK(v["energy_identity_residuals"].size() == 15);
    for (const char* k : {"assumption31", "decay_fits", "norm_scaling", "scaling_identity", "background_bound"})
        CHECK_FALSE(v.contains(k));
}

TEST_CASE("verify: missing inputs give 2, a corrupted checkpoint gives 5") {
    const auto& p = pipeline();
    REQUIRE(p.solve_a == 0);
    std::ostringstream log;
    auto empty = small(temp_dir("missing"), p.cache);
    CHECK(run([&] { return cli::cmd_verify(empty, log); }) == cli::kConfig);
    CHECK(run([&] { return cli::cmd_reconstruct(empty, log); }) == cli::kConfig);

    auto c = small(temp_dir("corrupt"), p.cache);
    fs::copy(fs::path(p.a) / "checkpoints", fs::path(c.output_dir) / "checkpoints");
    const fs::path ck = fs::path(c.output_dir) / "checkpoints" / solver::checkpoint_name(4.0, 1.0);
    {
        std::fstream f(ck, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(200);
        char b = 0;
        f.read(&b, 1);
        f.seekp(200);
        b ^= 0x10;
        f.write(&b, 1);
    }
    c.only = "norm_scaling";
    std::ostringstream err;
    CHECK(cli::run_guarded([&] { return cli::cmd_verify(c, log); }, err) == cli::kIntegrity);
    CHECK(err.str().find("integrity error") != std::string::npos);
}

TEST_CASE("reconstruct: tabulates u on scaled half balls") {
    const auto& p = pipeline();
    REQUIRE(p.solve_a == 0);
    auto c = small(temp_dir("reconstruct"), p.cache);
    fs::copy(fs::path(p.a) / "checkpoints", fs::path(c.output_dir) / "checkpoints");
    std::ostringstream log;
    REQUIRE(run([&] { return cli::cmd_reconstruct(c, log); }) == 0);
    std::ifstream is(fs::path(c.output_dir) / "reconstruction.csv");
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,x1,x2,x3,u1,u2,u3");
    int rows = 0, wall = 0;
    while (std::getline(is, line)) {
        ++rows;
        double v[7];
        char sep;
        std::istringstream ls(line);
        ls >> v[0];
        for (int k = 1; k < 7; ++k) ls >> sep >> v[k];
        if (v[3] == 0.0) {
            ++wall;
            CHECK(std::abs(v[4]) + std::abs(v[5]) + std::abs(v[6]) <= 1e-12);
        }
    }
    CHECK(rows > 0);
    CHECK(rows % 3 == 0);
    CHECK(wall > 0);
}

TEST_CASE("report: pretty-print, bad JSON, missing file") {
    const std::string d = temp_dir("report");
    std::ofstream(fs::path(d) / "ok.json") << "{\"schema\":\"verify-v1\",\"x\":[1,2]}";
    std::ofstream(fs::path(d) / "bad.json") << "{\"schema\": ";
    std::ostringstream out, err;
    CHECK(cli::run_guarded([&] { return cli::cmd_report((fs::path(d) / "ok.json").string(), out); }, err) == 0);
    CHECK(out.str().find("\n  \"schema\": \"verify-v1\"") != std::string::npos);
    CHECK(cli::run_guarded([&] { return cli::cmd_report((fs::path(d) / "bad.json").string(), out); }, err) ==
          cli::kIntegrity);
    CHECK(cli::run_guarded([&] { return cli::cmd_report((fs::path(d) / "none.json").string(), out); }, err) ==
          cli::kConfig);
}

TEST_CASE("binary: help documents every flag") {
    const auto top = spawn("--help");
    CHECK(top.status == 0);
    for (const char* s : {"propagate", "solve", "verify", "reconstruct", "kernels", "report"})
        CHECK(top.out.find(s) != std::string::npos);
    const std::vector<std::pair<std::string, std::vector<const char*>>> flags = {
        {"propagate", {"--config", "--datum", "--output-dir", "--jobs", "--t", "--route", "--field-extent"}},
        {"solve", {"--radii", "--spacing-rule", "--schedule", "--picard-tolerance", "--projection-tolerance",
                   "--linear-tolerance", "--max-picard", "--seed"}},
        {"verify", {"--only", "--trial-count", "--norm-times", "--bound-times", "--cache-dir"}},
        {"reconstruct", {"--times", "--radii"}},
        {"kernels", {"--kernel-tolerance", "--quadrature-points"}},
        {"report", {"path"}},
    };
    for (const auto& [sub, fl] : flags) {
        const auto h = spawn(sub + " --help");
        CHECK(h.status == 0);
        for (const char* f : fl) CHECK_MESSAGE(h.out.find(f) != std::string::npos, sub << " " << f);
    }
    CHECK(spawn("").status == cli::kConfig);
    CHECK(spawn("propagate --no-such-flag").status == cli::kConfig);
    CHECK(spawn("solve --radii 4,x,8").status == cli::kConfig);
}

TEST_CASE("binary: config file, flags override it") {
    const std::string d = temp_dir("config");
    const std::string cfg = (fs::path(d) / "run.cfg").string();
    std::ofstream(cfg) << "# zero field\n"
                          "datum = zero\n"
                          "t = 0.25\n"
                          "field_extent = 1   # overridden below\n"
                          "radii = 2,3,4      # solve only; ignored here\n";
    const std::string out = (fs::path(d) / "out").string();
    const auto r = spawn("propagate --config " + cfg + " --field-extent 2 --output-dir " + out);
    CHECK(r.status == 0);
    const auto rep = read_json(fs::path(out) / "decay_report.json");
    CHECK(rep["datum"] == "zero");
    CHECK(rep["t"] == 0.25);
    CHECK(rep["field_points"] == 5 * 5 * 3);

    std::ofstream(cfg, std::ios::app) << "colour = blue\n";
    const auto u = spawn("propagate --config " + cfg + " --output-dir " + out);
    CHECK(u.status == cli::kConfig);
    CHECK(u.out.find("unknown key 'colour'") != std::string::npos);
    CHECK(spawn("propagate --config " + (fs::path(d) / "absent.cfg").string()).status == cli::kConfig);

    ::setenv("LERAY_OUTPUT_DIR", (fs::path(d) / "env").string().c_str(), 1);
    CHECK(spawn("kernels").status == 0);
    ::unsetenv("LERAY_OUTPUT_DIR");
    CHECK(fs::exists(fs::path(d) / "env" / "kernels.csv"));
}
