#include "leray/stokes.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <sstream>

namespace leray::solver {

using Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

LerayOperator::LerayOperator(GridPtr g, double lam, bool upw)
    : grid(std::move(g)), lambda(lam), upwind(upw) {
    const auto& G = *grid;
    const double h = G.spacing(), h2 = h * h;
    std::vector<Triplet> ta, tb;
    ta.reserve(std::size_t(G.n_vel()) * 13);
    for (int id = 0; id < G.n_vel(); ++id) {
        const auto f = G.faces()[id];
        const Vec3 x = G.face_center(id);
        double diag = -lambda;
        const int idx[3] = {f.i, f.j, f.k};
        for (int e = 0; e < 3; ++e) {
            // neighbour value as (coefficient on u_f, neighbour id or -1)
            struct Nb {
                int id;
                double self;  // value = self * u_f when id < 0
            } nb[2];
            for (int s = 0; s < 2; ++s) {
                int n[3] = {idx[0], idx[1], idx[2]};
                n[e] += s == 0 ? -1 : 1;
                const int nid = G.vel_id(f.d, n[0], n[1], n[2]);
                nb[s] = {nid, nid >= 0 ? 0.0 : (e == f.d ? 0.0 : -1.0)};
            }
            // -d_ee u
            diag += 2.0 / h2;
            for (int s = 0; s < 2; ++s) {
                if (nb[s].id >= 0)
                    ta.emplace_back(id, nb[s].id, -1.0 / h2);
                else
                    diag += -nb[s].self / h2;
            }
            // -lambda x_e d_e u
            const double c = -lambda * x(e);
            if (c == 0.0) continue;
            double wm, w0, wp;  // d_e u ~ wm u_- + w0 u_f + wp u_+
            if (!upwind) {
                wm = -0.5 / h, w0 = 0.0, wp = 0.5 / h;
            } else if (c > 0.0) {
                wm = -1.0 / h, w0 = 1.0 / h, wp = 0.0;
            } else {
                wm = 0.0, w0 = -1.0 / h, wp = 1.0 / h;
            }
            diag += c * w0;
            const double w[2] = {wm, wp};
            for (int s = 0; s < 2; ++s) {
                if (w[s] == 0.0) continue;
                if (nb[s].id >= 0)
                    ta.emplace_back(id, nb[s].id, c * w[s]);
                else
                    diag += c * w[s] * nb[s].self;
            }
        }
        ta.emplace_back(id, id, diag);
    }
    A.resize(G.n_vel(), G.n_vel());
    A.setFromTriplets(ta.begin(), ta.end());
    for (int c = 0; c < G.n_p(); ++c) {
        const auto [i, j, k] = G.cells()[c];
        for (int d = 0; d < 3; ++d) {
            int hi[3] = {i, j, k};
            hi[d] += 1;
            const int lo_id = G.vel_id(d, i, j, k), hi_id = G.vel_id(d, hi[0], hi[1], hi[2]);
            if (hi_id >= 0) tb.emplace_back(c, hi_id, 1.0 / h);
            if (lo_id >= 0) tb.emplace_back(c, lo_id, -1.0 / h);
        }
    }
    B.resize(G.n_p(), G.n_vel());
    B.setFromTriplets(tb.begin(), tb.end());
}

void LerayOperator::apply(const VectorXd& u, const VectorXd& p, VectorXd& au, VectorXd& bu) const {
    au = A * u;
    au.noalias() -= B.transpose() * p;
    bu = B * u;
}

namespace {

struct Level {
    GridPtr grid;
    std::unique_ptr<LerayOperator> op;
    VectorXd diag;
    // per fluid cell: adjacent unknown faces and the sign of B (c, f) * h
    std::vector<std::array<int, 6>> cell_faces;
    std::vector<std::array<signed char, 6>> cell_sign;
    std::vector<int> cell_nf;
    // per face: low and high cells (pressure ids)
    std::vector<std::array<int, 2>> face_cells;
    SpMat Rv, Pv, Rp, Pp;  // to/from the next coarser level
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu;
};

void build_topology(Level& L) {
    const auto& G = *L.grid;
    L.diag = L.op->A.diagonal();
    L.cell_faces.assign(G.n_p(), {});
    L.cell_sign.assign(G.n_p(), {});
    L.cell_nf.assign(G.n_p(), 0);
    for (int c = 0; c < G.n_p(); ++c) {
        const auto [i, j, k] = G.cells()[c];
        for (int d = 0; d < 3; ++d) {
            int hi[3] = {i, j, k};
            hi[d] += 1;
            const int lo = G.vel_id(d, i, j, k), up = G.vel_id(d, hi[0], hi[1], hi[2]);
            if (lo >= 0) {
                L.cell_faces[c][L.cell_nf[c]] = lo;
                L.cell_sign[c][L.cell_nf[c]++] = -1;
            }
            if (up >= 0) {
                L.cell_faces[c][L.cell_nf[c]] = up;
                L.cell_sign[c][L.cell_nf[c]++] = 1;
            }
        }
    }
    L.face_cells.resize(G.n_vel());
    for (int id = 0; id < G.n_vel(); ++id) {
        const auto f = G.faces()[id];
        int lo[3] = {f.i, f.j, f.k};
        lo[f.d] -= 1;
        L.face_cells[id] = {G.p_id(lo[0], lo[1], lo[2]), G.p_id(f.i, f.j, f.k)};
    }
}

void build_transfer(Level& fine, const Level& coarse) {
    const auto& F = *fine.grid;
    const auto& C = *coarse.grid;
    std::vector<Triplet> t;
    for (int id = 0; id < F.n_vel(); ++id) {
        const auto f = F.faces()[id];
        int idx[3] = {f.i, f.j, f.k};
        int ci[3];
        for (int e = 0; e < 3; ++e) ci[e] = idx[e] / 2;
        if (idx[f.d] % 2 == 0) {
            const int cid = C.vel_id(f.d, ci[0], ci[1], ci[2]);
            if (cid >= 0) t.emplace_back(id, cid, 1.0);
        } else {
            for (int s = 0; s < 2; ++s) {
                int cc[3] = {ci[0], ci[1], ci[2]};
                cc[f.d] = (idx[f.d] - 1) / 2 + s;
                const int cid = C.vel_id(f.d, cc[0], cc[1], cc[2]);
                if (cid >= 0) t.emplace_back(id, cid, 0.5);
            }
        }
    }
    fine.Pv.resize(F.n_vel(), C.n_vel());
    fine.Pv.setFromTriplets(t.begin(), t.end());
    fine.Rv = SpMat(fine.Pv.transpose()) * 0.125;
    t.clear();
    for (int c = 0; c < F.n_p(); ++c) {
        const auto [i, j, k] = F.cells()[c];
        const int cc = C.p_id(i / 2, j / 2, k / 2);
        if (cc >= 0) t.emplace_back(c, cc, 1.0);
    }
    fine.Pp.resize(F.n_p(), C.n_p());
    fine.Pp.setFromTriplets(t.begin(), t.end());
    fine.Rp = SpMat(fine.Pp.transpose()) * 0.125;
}

void factor_coarsest(Level& L) {
    const auto& A = L.op->A;
    const auto& B = L.op->B;
    const int nv = int(A.rows()), np = int(B.rows());
    std::vector<Triplet> t;
    for (int r = 0; r < nv; ++r)
        for (SpMat::InnerIterator it(A, r); it; ++it) t.emplace_back(r, int(it.col()), it.value());
    // The first cell pins the pressure constant; cells without unknown faces
    // (possible on coarse staircases) carry a decoupled pressure, pinned too.
    for (int r = 0; r < np; ++r) {
        const bool pin = r == 0 || L.cell_nf[r] == 0;
        for (SpMat::InnerIterator it(B, r); it; ++it) {
            if (!pin) t.emplace_back(nv + r, int(it.col()), it.value());
            t.emplace_back(int(it.col()), nv + r, -it.value());
        }
        if (pin) t.emplace_back(nv + r, nv + r, 1.0);
    }
    Eigen::SparseMatrix<double> K(nv + np, nv + np);
    K.setFromTriplets(t.begin(), t.end());
    K.prune(0.0);
    L.lu = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    L.lu->compute(K);
    if (L.lu->info() != Eigen::Success)
        throw NumericalError("coarse-level factorization failed", 0.0);
}

}  // namespace

struct LinearSolver::Impl {
    LinearOptions opt;
    std::vector<Level> levels;

    void smooth(const Level& L, const VectorXd& f, const VectorXd& g, VectorXd& u, VectorXd& p,
                bool backward) const {
        const auto& A = L.op->A;
        const double h = L.grid->spacing(), h2 = h * h;
        const int np = L.grid->n_p();
        const double w = opt.relaxation;
        for (int s = 0; s < np; ++s) {
            const int c = backward ? np - 1 - s : s;
            const int nf = L.cell_nf[c];
            if (nf == 0) continue;
            double rf[6];
            double sum_r = 0.0, sum_w = 0.0, rc = g(c);
            for (int m = 0; m < nf; ++m) {
                const int fid = L.cell_faces[c][m];
                double r = f(fid);
                for (SpMat::InnerIterator it(A, fid); it; ++it) r -= it.value() * u(it.col());
                const auto& fc = L.face_cells[fid];
                r += (p(fc[0]) - p(fc[1])) / h;
                rf[m] = r;
                const double sg = L.cell_sign[c][m] / h;
                rc -= sg * u(fid);
                sum_r += sg * r / L.diag(fid);
                sum_w += 1.0 / (h2 * L.diag(fid));
            }
            const double dp = (sum_r - rc) / (-sum_w);
            for (int m = 0; m < nf; ++m) {
                const int fid = L.cell_faces[c][m];
                const double G = -L.cell_sign[c][m] / h;  // gradient coefficient of p_c in row fid
                u(fid) += w * (rf[m] - G * dp) / L.diag(fid);
            }
            p(c) += w * dp;
        }
    }

    void vcycle(std::size_t l, const VectorXd& f, const VectorXd& g, VectorXd& u, VectorXd& p) const {
        const Level& L = levels[l];
        if (L.lu) {
            VectorXd rhs(f.size() + g.size());
            rhs << f, g;
            for (Eigen::Index c = 0; c < g.size(); ++c)
                if (c == 0 || L.cell_nf[c] == 0) rhs(f.size() + c) = 0.0;
            const VectorXd x = L.lu->solve(rhs);
            u = x.head(f.size());
            p = x.tail(g.size());
            return;
        }
        for (int s = 0; s < opt.smoothing; ++s) smooth(L, f, g, u, p, false);
        VectorXd au, bu;
        L.op->apply(u, p, au, bu);
        const VectorXd rf = L.Rv * (f - au), rg = L.Rp * (g - bu);
        VectorXd cu = VectorXd::Zero(rf.size()), cp = VectorXd::Zero(rg.size());
        vcycle(l + 1, rf, rg, cu, cp);
        u += L.Pv * cu;
        p += L.Pp * cp;
        for (int s = 0; s < opt.smoothing; ++s) smooth(L, f, g, u, p, true);
    }
};

LinearSolver::LinearSolver(GridPtr g, double lambda, LinearOptions opt) : impl_(std::make_unique<Impl>()) {
    impl_->opt = opt;
    GridPtr cur = std::move(g);
    bool first = true;
    while (cur) {
        Level L;
        L.grid = cur;
        L.op = std::make_unique<LerayOperator>(cur, lambda, !first);
        build_topology(L);
        impl_->levels.push_back(std::move(L));
        first = false;
        cur = cur->coarsened();
    }
    for (std::size_t l = 0; l + 1 < impl_->levels.size(); ++l)
        build_transfer(impl_->levels[l], impl_->levels[l + 1]);
    factor_coarsest(impl_->levels.back());
}

LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;

const LerayOperator& LinearSolver::op() const { return *impl_->levels.front().op; }

LinearStats LinearSolver::solve(const VectorField& f, VectorField& v, ScalarField& p) const {
    const Level& L0 = impl_->levels.front();
    const auto& grid = L0.grid;
    if (f.grid.get() != grid.get() && f.grid->n_vel() != grid->n_vel())
        throw ValidationError("linear solve: right side on a different grid");
    const int nv = grid->n_vel(), np = grid->n_p(), N = nv + np;
    v = VectorField(grid);
    p = ScalarField(grid);
    LinearStats st;
    VectorXd b(N);
    b << f.u, VectorXd::Zero(np);
    const double bnorm = b.norm();
    if (bnorm == 0.0) return st;

    const int m = impl_->opt.restart;
    VectorXd x = VectorXd::Zero(N);
    auto matvec = [&](const VectorXd& z) {
        VectorXd au, bu;
        L0.op->apply(z.head(nv), z.tail(np), au, bu);
        VectorXd out(N);
        out << au, bu;
        return out;
    };
    auto precond = [&](const VectorXd& r) {
        VectorXd u = VectorXd::Zero(nv), q = VectorXd::Zero(np);
        impl_->vcycle(0, r.head(nv), r.tail(np), u, q);
        VectorXd out(N);
        out << u, q;
        return out;
    };
    VectorXd r = b - matvec(x);
    double rel = r.norm() / bnorm;
    st.history.push_back(rel);
    while (rel > impl_->opt.tolerance && st.iterations < impl_->opt.max_iterations) {
        std::vector<VectorXd> V, Z;
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
        VectorXd cs = VectorXd::Zero(m), sn = VectorXd::Zero(m), gam = VectorXd::Zero(m + 1);
        const double beta = r.norm();
        gam(0) = beta;
        V.push_back(r / beta);
        int k = 0;
        for (; k < m && st.iterations < impl_->opt.max_iterations; ++k) {
            Z.push_back(precond(V[k]));
            VectorXd w = matvec(Z[k]);
            for (int i = 0; i <= k; ++i) {
                H(i, k) = w.dot(V[i]);
                w -= H(i, k) * V[i];
            }
            const double hn = w.norm();
            H(k + 1, k) = hn;
            for (int i = 0; i < k; ++i) {
                const double t = cs(i) * H(i, k) + sn(i) * H(i + 1, k);
                H(i + 1, k) = -sn(i) * H(i, k) + cs(i) * H(i + 1, k);
                H(i, k) = t;
            }
            const double den = std::hypot(H(k, k), H(k + 1, k));
            cs(k) = H(k, k) / den;
            sn(k) = H(k + 1, k) / den;
            H(k, k) = den;
            H(k + 1, k) = 0.0;
            gam(k + 1) = -sn(k) * gam(k);
            gam(k) = cs(k) * gam(k);
            ++st.iterations;
            rel = std::abs(gam(k + 1)) / bnorm;
            st.history.push_back(rel);
            if (rel <= impl_->opt.tolerance || hn == 0.0) {
                ++k;
                break;
            }
            V.push_back(w / hn);
        }
        VectorXd y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(gam.head(k));
        for (int i = 0; i < k; ++i) x += y(i) * Z[i];
        r = b - matvec(x);
        rel = r.norm() / bnorm;
        st.history.back() = rel;
    }
    st.relative_residual = rel;
    v.u = x.head(nv);
    p.p = x.tail(np);
    if (np > 0) p.p.array() -= p.p.mean();
    if (rel > impl_->opt.tolerance) {
        std::ostringstream os;
        os << "linear solver did not converge: relative residual " << rel << " after "
           << st.iterations << " iterations; history";
        for (std::size_t i = 0; i < st.history.size(); i += std::max<std::size_t>(1, st.history.size() / 8))
            os << ' ' << st.history[i];
        throw NumericalError(os.str(), rel);
    }
    return st;
}

StokesResult stokes_solve(GridPtr g, const VectorField& force, const LinearOptions& opt) {
    LinearSolver s(g, 0.0, opt);
    StokesResult out;
    out.stats = s.solve(force, out.v, out.p);
    return out;
}

}  // namespace leray::solver
