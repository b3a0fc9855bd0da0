#pragma once

#include "leray/grid.hpp"

#include <Eigen/Sparse>

#include <memory>
#include <vector>

namespace leray::solver {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Discretization of
//   -lap V - lambda (V + x.grad V) + grad P = f,   div V = g
// on the MAC grid. Tangential no-slip through mirror ghosts half a cell
// outside the fluid; x.grad by centred differences, or first-order upwind
// (for coarse multigrid levels).
struct LerayOperator {
    GridPtr grid;
    double lambda = 0.0;
    bool upwind = false;
    SpMat A;  // velocity block
    SpMat B;  // divergence; the gradient is -B^T

    LerayOperator(GridPtr g, double lambda, bool upwind = false);

    // (A u - B^T p, B u)
    void apply(const Eigen::VectorXd& u, const Eigen::VectorXd& p, Eigen::VectorXd& au,
               Eigen::VectorXd& bu) const;
};

struct LinearOptions {
    double tolerance = 1e-10;  // relative residual of the coupled system
    int max_iterations = 300;
    int restart = 40;
    int smoothing = 2;         // SCGS sweeps before and after the coarse correction
    double relaxation = 0.8;
};

struct LinearStats {
    int iterations = 0;
    double relative_residual = 0.0;
    std::vector<double> history;
};

// FGMRES on the coupled system, preconditioned by a multigrid V-cycle with
// symmetric coupled Gauss-Seidel (Vanka cell blocks) smoothing; sparse LU on
// the coarsest level.
class LinearSolver {
public:
    LinearSolver(GridPtr g, double lambda, LinearOptions opt = {});
    ~LinearSolver();
    LinearSolver(LinearSolver&&) noexcept;

    // Solves for (v, p) with momentum right side f and zero divergence.
    // Pressure is returned with zero mean. Throws NumericalError with the
    // residual history in the message when the tolerance is not reached.
    LinearStats solve(const VectorField& f, VectorField& v, ScalarField& p) const;

    const LerayOperator& op() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// -lap V + grad P = f, div V = 0, V = 0 on the boundary.
struct StokesResult {
    VectorField v;
    ScalarField p;
    LinearStats stats;
};
StokesResult stokes_solve(GridPtr g, const VectorField& force, const LinearOptions& opt = {});

}  // namespace leray::solver
