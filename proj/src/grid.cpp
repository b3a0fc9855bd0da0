#include "leray/grid.hpp"

#include <cmath>

namespace leray::solver {

HalfBallGrid::HalfBallGrid(double radius, double spacing, int min_cells)
    : R_(radius), h_(spacing) {
    if (!(radius > 0.0) || !(spacing > 0.0)) throw ValidationError("grid: radius and spacing must be positive");
    const double ratio = radius / spacing;
    n_ = int(std::lround(ratio));
    if (std::abs(ratio - n_) > 1e-9 * ratio) throw ValidationError("grid: R/h must be an integer");
    if (n_ < min_cells) throw ValidationError("grid: R/h must be at least " + std::to_string(min_cells));
    h_ = R_ / n_;
    const int nx = 2 * n_;
    flags_.assign(std::size_t(nx) * nx * n_, CellFlag::exterior);
    pid_.assign(flags_.size(), -1);
    for (int k = 0; k < n_; ++k)
        for (int j = 0; j < nx; ++j)
            for (int i = 0; i < nx; ++i)
                if (cell_center(i, j, k).norm() < R_) flags_[cell_lin(i, j, k)] = CellFlag::interior;
    for (int k = 0; k < n_; ++k)
        for (int j = 0; j < nx; ++j)
            for (int i = 0; i < nx; ++i) {
                auto& f = flags_[cell_lin(i, j, k)];
                if (f == CellFlag::interior) {
                    pid_[cell_lin(i, j, k)] = int(cells_.size());
                    cells_.push_back({i, j, k});
                    continue;
                }
                for (int d = 0; d < 3 && f == CellFlag::exterior; ++d)
                    for (int s : {-1, 1}) {
                        std::array<int, 3> c{i, j, k};
                        c[d] += s;
                        if (in_box(c[0], c[1], c[2]) && flags_[cell_lin(c[0], c[1], c[2])] == CellFlag::interior)
                            f = CellFlag::boundary;
                    }
            }
    for (int d = 0; d < 3; ++d) vid_[d].assign(std::size_t(nx + 1) * (nx + 1) * (n_ + 1), -1);
    for (int d = 0; d < 3; ++d)
        for (int k = 0; k < n_; ++k)
            for (int j = 0; j < nx; ++j)
                for (int i = 0; i < nx; ++i) {
                    std::array<int, 3> lo{i, j, k};
                    lo[d] -= 1;
                    if (fluid(i, j, k) && fluid(lo[0], lo[1], lo[2])) {
                        vid_[d][face_lin(i, j, k)] = int(faces_.size());
                        faces_.push_back({d, i, j, k});
                    }
                }
}

Vec3 HalfBallGrid::cell_center(int i, int j, int k) const {
    return {-R_ + (i + 0.5) * h_, -R_ + (j + 0.5) * h_, (k + 0.5) * h_};
}

Vec3 HalfBallGrid::face_center(int d, int i, int j, int k) const {
    Vec3 c = cell_center(i, j, k);
    c(d) -= 0.5 * h_;
    return c;
}

std::shared_ptr<const HalfBallGrid> HalfBallGrid::coarsened() const {
    if (n_ % 2 != 0 || n_ / 2 < 3) return nullptr;
    return std::make_shared<HalfBallGrid>(R_, 2.0 * h_, 3);
}

VectorField sample_faces(GridPtr g, const std::function<Vec3(const Vec3&)>& f) {
    VectorField v(g);
    for (int id = 0; id < g->n_vel(); ++id) v.u(id) = f(g->face_center(id))(g->faces()[id].d);
    return v;
}

Eigen::VectorXd divergence(const VectorField& v) {
    const auto& g = *v.grid;
    Eigen::VectorXd out(g.n_p());
    auto val = [&](int d, int i, int j, int k) {
        const int id = g.vel_id(d, i, j, k);
        return id < 0 ? 0.0 : v.u(id);
    };
    for (int c = 0; c < g.n_p(); ++c) {
        const auto [i, j, k] = g.cells()[c];
        out(c) = (val(0, i + 1, j, k) - val(0, i, j, k) + val(1, i, j + 1, k) - val(1, i, j, k) +
                  val(2, i, j, k + 1) - val(2, i, j, k)) /
                 g.spacing();
    }
    return out;
}

Vec3 interpolate(const VectorField& v, const Vec3& x) {
    const auto& g = *v.grid;
    const double R = g.radius(), h = g.spacing();
    Vec3 out = Vec3::Zero();
    for (int d = 0; d < 3; ++d) {
        // lattice coordinates of component d
        double q[3];
        for (int e = 0; e < 3; ++e) {
            const double o = e < 2 ? -R : 0.0;
            q[e] = (x(e) - o) / h - (e == d ? 0.0 : 0.5);
        }
        int b[3];
        double w[3];
        for (int e = 0; e < 3; ++e) {
            b[e] = int(std::floor(q[e]));
            w[e] = q[e] - b[e];
        }
        double acc = 0.0;
        for (int c = 0; c < 8; ++c) {
            const int i = b[0] + (c & 1), j = b[1] + ((c >> 1) & 1), k = b[2] + ((c >> 2) & 1);
            // tangential components below the wall: the odd mirror ghost
            const bool ghost = d < 2 && k == -1;
            const int id = g.vel_id(d, i, j, ghost ? 0 : k);
            if (id < 0) continue;
            const double wt = ((c & 1) ? w[0] : 1 - w[0]) * (((c >> 1) & 1) ? w[1] : 1 - w[1]) *
                              (((c >> 2) & 1) ? w[2] : 1 - w[2]);
            acc += (ghost ? -wt : wt) * v.u(id);
        }
        out(d) = acc;
    }
    return out;
}

namespace {

// Component d at lattice index (i, j, k) as interpolate() sees it.
double lattice_value(const VectorField& v, int d, int i, int j, int k) {
    const bool ghost = d < 2 && k == -1;
    const int id = v.grid->vel_id(d, i, j, ghost ? 0 : k);
    if (id < 0) return 0.0;
    return ghost ? -v.u(id) : v.u(id);
}

}  // namespace

Mat3 interpolate_gradient(const VectorField& v, const Vec3& x) {
    const auto& g = *v.grid;
    const double R = g.radius(), h = g.spacing();
    Mat3 out = Mat3::Zero();
    for (int d = 0; d < 3; ++d)
        for (int e = 0; e < 3; ++e) {
            // the quotient (V(idx + e) - V(idx)) / h sits half a step along e
            double q[3];
            int b[3];
            double w[3];
            for (int a = 0; a < 3; ++a) {
                const double o = a < 2 ? -R : 0.0;
                q[a] = (x(a) - o) / h - (a == d ? 0.0 : 0.5) - (a == e ? 0.5 : 0.0);
                b[a] = int(std::floor(q[a]));
                w[a] = q[a] - b[a];
            }
            double acc = 0.0;
            for (int c = 0; c < 8; ++c) {
                int idx[3] = {b[0] + (c & 1), b[1] + ((c >> 1) & 1), b[2] + ((c >> 2) & 1)};
                const double wt = ((c & 1) ? w[0] : 1 - w[0]) * (((c >> 1) & 1) ? w[1] : 1 - w[1]) *
                                  (((c >> 2) & 1) ? w[2] : 1 - w[2]);
                if (wt == 0.0) continue;
                int nb[3] = {idx[0], idx[1], idx[2]};
                nb[e] += 1;
                acc += wt * (lattice_value(v, d, nb[0], nb[1], nb[2]) - lattice_value(v, d, idx[0], idx[1], idx[2]));
            }
            out(d, e) = acc / h;
        }
    return out;
}

}  // namespace leray::solver
