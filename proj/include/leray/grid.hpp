#pragma once

#include "leray/common.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace leray::solver {

enum class CellFlag : std::uint8_t { exterior = 0, interior = 1, boundary = 2 };

// Marker-and-cell grid on the half ball {x3 > 0, |x| < R}, cut from the box
// [-R, R]^2 x [0, R] with n = R/h cells per half width. Fluid cells are
// those whose centre lies inside the ball; non-fluid cells touching a fluid
// cell are the Dirichlet layer (the wall x3 = 0 is a cell boundary).
//
// Face (d; i, j, k) is the low face of cell (i, j, k) in direction d. A face
// carries an unknown when both adjacent cells are fluid; every other face next
// to a fluid cell holds a zero Dirichlet value.
class HalfBallGrid {
public:
    // min_cells lowers the R/h >= 8 requirement for multigrid levels only.
    HalfBallGrid(double radius, double spacing, int min_cells = 8);

    double radius() const { return R_; }
    double spacing() const { return h_; }
    int n() const { return n_; }
    int nx() const { return 2 * n_; }
    int nz() const { return n_; }

    bool in_box(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < 2 * n_ && j < 2 * n_ && k < n_;
    }
    CellFlag flag(int i, int j, int k) const {
        return in_box(i, j, k) ? flags_[cell_lin(i, j, k)] : CellFlag::exterior;
    }
    bool fluid(int i, int j, int k) const { return flag(i, j, k) == CellFlag::interior; }

    // -1 when the face or cell has no unknown.
    int vel_id(int d, int i, int j, int k) const {
        if (i < 0 || j < 0 || k < 0 || i > 2 * n_ || j > 2 * n_ || k > n_) return -1;
        return vid_[d][face_lin(i, j, k)];
    }
    int p_id(int i, int j, int k) const { return in_box(i, j, k) ? pid_[cell_lin(i, j, k)] : -1; }

    int n_vel() const { return int(faces_.size()); }
    int n_p() const { return int(cells_.size()); }

    struct Face {
        int d, i, j, k;
    };
    const std::vector<Face>& faces() const { return faces_; }
    const std::vector<std::array<int, 3>>& cells() const { return cells_; }

    Vec3 face_center(int d, int i, int j, int k) const;
    Vec3 face_center(int id) const {
        const auto& f = faces_[id];
        return face_center(f.d, f.i, f.j, f.k);
    }
    Vec3 cell_center(int i, int j, int k) const;
    double cell_volume() const { return h_ * h_ * h_; }

    // The grid with spacing 2h, or null when n is odd or too small.
    std::shared_ptr<const HalfBallGrid> coarsened() const;

private:
    std::size_t cell_lin(int i, int j, int k) const {
        return (std::size_t(k) * (2 * n_) + j) * (2 * n_) + i;
    }
    std::size_t face_lin(int i, int j, int k) const {
        return (std::size_t(k) * (2 * n_ + 1) + j) * (2 * n_ + 1) + i;
    }
    double R_, h_;
    int n_;
    std::vector<CellFlag> flags_;
    std::vector<int> pid_;
    std::vector<int> vid_[3];
    std::vector<Face> faces_;
    std::vector<std::array<int, 3>> cells_;
};

using GridPtr = std::shared_ptr<const HalfBallGrid>;

// Face-normal velocity samples (one per unknown face; Dirichlet faces are zero).
struct VectorField {
    GridPtr grid;
    Eigen::VectorXd u;

    VectorField() = default;
    explicit VectorField(GridPtr g) : grid(std::move(g)), u(Eigen::VectorXd::Zero(grid->n_vel())) {}
};

// Cell-centred samples on fluid cells.
struct ScalarField {
    GridPtr grid;
    Eigen::VectorXd p;

    ScalarField() = default;
    explicit ScalarField(GridPtr g) : grid(std::move(g)), p(Eigen::VectorXd::Zero(grid->n_p())) {}
};

// Samples a vector function at face centres (normal component only).
VectorField sample_faces(GridPtr g, const std::function<Vec3(const Vec3&)>& f);

// Per-cell discrete divergence (flux balance / volume).
Eigen::VectorXd divergence(const VectorField& v);

// Velocity at an arbitrary point: each component trilinear in its own
// staggered lattice, Dirichlet faces counting as zero except the row below
// x3 = 0, which holds the mirror ghosts (so V vanishes on the wall). Zero
// outside the box.
Vec3 interpolate(const VectorField& v, const Vec3& x);

// (d, e) = d_e V_d from the difference quotients of V along e, each
// trilinear on its own lattice. Continuous, unlike the gradient of
// interpolate(), which it matches at the quotients' nodes.
Mat3 interpolate_gradient(const VectorField& v, const Vec3& x);

}  // namespace leray::solver
