#pragma once

#include "leray/grid.hpp"
#include "leray/propagator.hpp"
#include "leray/stokes.hpp"

#include <functional>
#include <string>
#include <vector>

namespace leray::solver {

// U0 and the data F0, F1 need from it, at the centres of the unknown faces.
struct Background {
    GridPtr grid;
    std::vector<Vec3> value;
    std::vector<Mat3> grad;     // grad(i, j) = d_j U0_i
    std::vector<Vec3> linear;   // lap U0 + U0 + x.grad U0
    bool zero = true;

    static Background none(GridPtr g);
    static Background from_table(GridPtr g, const propagator::ProfileTable& t);
    // field.points must be face_points(*g); gradients and Laplacians required.
    static Background from_field(GridPtr g, const propagator::PropagatedField& field);
};

std::vector<Vec3> face_points(const HalfBallGrid& g);

// F0 = lap U0 + U0 + x.grad U0 - U0.grad U0, normal component per face.
VectorField assemble_F0(const Background& bg);

// F1(V) = -(U0 + V).grad V - V.grad U0. Derivatives of V are centred, and
// one-sided (second order on the non-uniform stencil) next to a wall that
// lies half a cell away.
VectorField apply_F1(const Background& bg, const VectorField& v);

// int |grad V|^2 in the discrete form of the solver's Laplacian (mirror
// ghosts at walls), and int |V|^2.
double dirichlet_energy(const VectorField& v);
double l2_norm_sq(const VectorField& v);
// (int |grad V|^2 + 1/2 int |V|^2)^{1/2}
double h1_norm(const VectorField& v);

// int f . g over the fluid (face quadrature).
double inner(const VectorField& f, const VectorField& g);

// (V . grad U0) per face, normal component.
VectorField advect_background(const Background& bg, const VectorField& v);

struct ContinuationOptions {
    std::vector<double> schedule{0.0, 0.25, 0.5, 0.75, 1.0};
    double tolerance = 1e-8;      // relative H1 size of the Picard update
    double relaxation = 0.7;
    int max_picard = 200;
    int stall_window = 10;        // stall: < 1% residual reduction over this many iterations
    double min_step = 1.0 / 256;  // smallest lambda increment before giving up
    LinearOptions linear;
    std::string checkpoint_dir;   // empty: no checkpoints
};

struct StepRecord {
    double lambda = 0.0;
    bool accepted = false;
    std::vector<double> residuals;  // Picard history, non-increasing when accepted
    double h1 = 0.0;
    double energy_residual = 0.0;
    int linear_iterations = 0;
    std::string note;
};

struct ContinuationState {
    double lambda = 0.0;
    VectorField v;
    ScalarField p;
    std::vector<double> picard_residuals;  // history of the last accepted step
    double under_relaxation = 0.7;
    std::vector<StepRecord> steps;         // every attempted step, in order
    bool complete = false;
    std::string message;
};

// Follows the branch from V = 0 through the schedule. Each linear solve is
//   -lap V - lambda (V + x.grad V) + grad P = lambda (F0 + F1(V)),  div V = 0,
// with F1 lagged (Picard, under-relaxed, with backtracking). A stalled step
// is retried at half the increment; when the increment falls below min_step
// the state of the last accepted step is returned with complete == false.
ContinuationState leray_continuation(GridPtr g, const Background& bg, const ContinuationOptions& opt);

// Checkpoint: "LERAYV1\0", f64 radius, spacing, lambda, u64 n, n_vel, n_p,
// f64 velocities, f64 pressures, u64 FNV-1a of all preceding bytes.
void save_checkpoint(const std::string& path, const VectorField& v, const ScalarField& p, double lambda);
struct Checkpoint {
    GridPtr grid;
    VectorField v;
    ScalarField p;
    double lambda = 0.0;
};
Checkpoint load_checkpoint(const std::string& path);
std::string checkpoint_name(double radius, double lambda);

struct RadiusResult {
    double radius = 0.0, spacing = 0.0;
    ContinuationState state;
    double h1 = 0.0;
    double energy_residual = 0.0;
};

struct InvadingResult {
    std::vector<RadiusResult> runs;
    bool complete = false;
    double final_change = 0.0;  // relative change of the H1 norm over the last two radii
    bool stabilized = false;    // final_change <= 10%
};

// Solves on each radius in turn (or concurrently with jobs > 1); source
// supplies U0 on a grid. A failed continuation ends the run with partial
// results and complete == false.
InvadingResult invading_run(const std::vector<double>& radii,
                            const std::function<double(double)>& spacing,
                            const std::function<Background(GridPtr)>& source,
                            const ContinuationOptions& opt, int jobs = 1);

}  // namespace leray::solver
