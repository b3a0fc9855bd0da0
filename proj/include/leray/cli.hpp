#pragma once

#include "leray/propagator.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace leray::cli {

enum ExitCode : int { kOk = 0, kConfig = 2, kQuadrature = 3, kContinuation = 4, kIntegrity = 5 };

struct RunConfig {
    std::string datum = "swirl";   // catalog name, "<eps>*<name>" or CSV path
    double time = 0.5;
    std::string route = "solonnikov";  // solonnikov | reflection | both

    // quadrature for field dumps, decay rays and the background bound
    int quadrature_points = 32;
    double quadrature_tolerance = 1e-6;
    double radial_cutoff = 12.0;
    double kernel_tolerance = 1e-4;  // G* tabulation (the layer integrals near the pole are stiff)
    // quadrature and node step of the profile table the solver uses
    int table_points = 24;
    double table_tolerance = 1e-6;
    double table_step = 0.15;

    double field_extent = 4.0;     // u0_field.csv lattice over [-E, E]^2 x [0, E]
    double field_spacing = 1.0;

    std::vector<double> radii{4.0, 6.0, 8.0};
    std::string spacing_rule = "R/24";
    std::vector<double> schedule{0.0, 0.25, 0.5, 0.75, 1.0};
    double picard_tolerance = 1e-8;
    double projection_tolerance = 1e-8;  // relative discrete divergence of accepted V
    double linear_tolerance = 1e-10;
    double relaxation = 0.7;
    int max_picard = 200;  // per lambda step

    std::uint64_t seed = 20240611;
    int trial_count = 20;
    std::vector<double> norm_times{0.25, 0.5, 1.0};
    std::vector<double> bound_times{0.1, 0.5, 1.0};
    std::vector<double> reconstruct_times{0.125, 0.5, 2.0};
    std::string only;        // verify: run a single check

    std::string output_dir;  // default: $LERAY_OUTPUT_DIR, else "leray_out"
    std::string cache_dir;   // default: <output_dir>/cache
    int jobs = 1;

    // Throws ValidationError naming the offending field.
    void validate() const;
    propagator::QuadratureSpec quadrature() const;
    propagator::QuadratureSpec table_quadrature() const;
    std::string resolved_output_dir() const;
    std::string resolved_cache_dir() const;
};

// "R/24", "0.05*R" or a constant such as "0.25".
std::function<double(double)> parse_spacing_rule(const std::string& rule);

// Each command writes only under the output directory, logs progress to
// `log`, and returns an ExitCode; exceptions are mapped by run_guarded.
int cmd_propagate(const RunConfig& c, std::ostream& log);
int cmd_solve(const RunConfig& c, std::ostream& log);
int cmd_verify(const RunConfig& c, std::ostream& log);
int cmd_reconstruct(const RunConfig& c, std::ostream& log);
int cmd_kernels(const RunConfig& c, std::ostream& log);
int cmd_report(const std::string& path, std::ostream& out);

// Runs f, turning the library's exceptions into exit codes with a message on err.
int run_guarded(const std::function<int()>& f, std::ostream& err);

// Names of the verify checks accepted by `only`.
const std::vector<std::string>& verify_checks();

}  // namespace leray::cli
