#include "eigendrift/eig.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace eigendrift {

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SpMatCol = Eigen::SparseMatrix<double>;

struct CwBounds {
    double lo, hi;          // Collatz-Wielandt interval (shift selection)
    double lambda_hat;      // ratio at the largest entry: the accurate one
    double resid;           // ||A v - lambda_hat v||_inf / ||v||_inf
    double gap() const { return hi - lo; }
};

// Collatz-Wielandt ratios restricted to entries that are large enough to
// be numerically meaningful: a ratio (A v)_i / v_i carries an absolute
// error of about diag_max * eps / (v_i / ||v||), so tiny eigenvector
// tails (e^{-r^2} and the like) produce pure noise. Convergence is
// therefore judged by the global residual against the ratio at the
// largest entry, which is accurate to diag_max * eps.
CwBounds cw_bounds(const SpMat& A, const Eigen::VectorXd& v,
                   Eigen::VectorXd& work) {
    work.noalias() = A * v;
    const double vmax = v.maxCoeff();
    const double cutoff = 1e-6 * vmax;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    Eigen::Index imax = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] > v[imax]) imax = i;
        if (v[i] < cutoff) continue;
        double r = work[i] / v[i];
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    CwBounds cw{lo, hi, work[imax] / v[imax], 0.0};
    double resid = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        resid = std::max(resid, std::abs(work[i] - cw.lambda_hat * v[i]));
    cw.resid = resid / vmax;
    return cw;
}

void normalize_positive(Eigen::VectorXd& v) {
    double m = v.maxCoeff();
    if (!(m > 0.0)) throw NotConverged(0, std::numeric_limits<double>::quiet_NaN());
    v /= m;
    double floor = 1e-300;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!(v[i] > floor)) v[i] = floor;
}

// One-shot linear solver wrapper: direct for small or tridiagonal
// systems, ILUT-preconditioned BiCGSTAB for large 2-D grids.
class ShiftedSolver {
  public:
    ShiftedSolver(const SpMat& A, double s) {
        // the matrix must outlive the solver: iterative solvers keep a
        // reference to what compute() received
        m_ = (-A).eval();
        for (int i = 0; i < m_.rows(); ++i) m_.coeffRef(i, i) += s;
        m_.makeCompressed();
        bool small = m_.rows() <= 150000 ||
                     m_.nonZeros() <= 3 * m_.rows() + 2;
        if (small) {
            lu_ = std::make_unique<Eigen::SparseLU<SpMatCol>>();
            lu_->compute(m_);
            ok_ = lu_->info() == Eigen::Success;
        } else {
            it_ = std::make_unique<
                Eigen::BiCGSTAB<SpMatCol, Eigen::IncompleteLUT<double>>>();
            it_->preconditioner().setFillfactor(12);
            it_->preconditioner().setDroptol(1e-5);
            it_->setTolerance(1e-13);
            it_->setMaxIterations(4000);
            it_->compute(m_);
            ok_ = it_->info() == Eigen::Success;
        }
    }

    bool ok() const { return ok_; }

    bool solve(const Eigen::VectorXd& rhs, Eigen::VectorXd& out) const {
        if (lu_) {
            out = lu_->solve(rhs);
            return lu_->info() == Eigen::Success;
        }
        out = it_->solveWithGuess(rhs, rhs);
        return it_->info() == Eigen::Success && out.allFinite();
    }

  private:
    SpMatCol m_;
    std::unique_ptr<Eigen::SparseLU<SpMatCol>> lu_;
    std::unique_ptr<
        Eigen::BiCGSTAB<SpMatCol, Eigen::IncompleteLUT<double>>>
        it_;
    bool ok_ = false;
};

}  // namespace

MatrixEigenResult perron_solve(const SpMat& A, double tol, int max_iter,
                               const Eigen::VectorXd* warm_start) {
    const Eigen::Index n = A.rows();
    if (n == 1)
        return {A.coeff(0, 0), Eigen::VectorXd::Ones(1), 0.0, 0};

    double sigma = 1.0;
    for (Eigen::Index i = 0; i < n; ++i)
        sigma = std::max(sigma, 1.0 - A.coeff(i, i));

    Eigen::VectorXd v;
    if (warm_start && warm_start->size() == n) {
        v = *warm_start;
        normalize_positive(v);
    } else {
        v = Eigen::VectorXd::Ones(n);
    }

    Eigen::VectorXd work(n);
    int iters = 0;
    auto converged = [&](const CwBounds& cw) {
        return cw.resid < tol * (1.0 + std::abs(cw.lambda_hat));
    };

    // Phase 1: plain power iteration on A + sigma I.
    CwBounds cw = cw_bounds(A, v, work);
    int phase1 = std::min(200, max_iter);
    while (iters < phase1 && !converged(cw)) {
        v = work + sigma * v;  // work == A v from cw_bounds
        normalize_positive(v);
        cw = cw_bounds(A, v, work);
        ++iters;
    }

    // Phase 2: shifted inverse iteration. The shift tracks the upper
    // Collatz-Wielandt bound from above, so s - lambda stays positive
    // and (sI - A) remains an M-matrix with nonnegative inverse.
    int stale = 0;
    while (iters < max_iter && !converged(cw)) {
        // cw.hi >= lambda_1 holds for any positive iterate, so a small
        // margin keeps sI - A an M-matrix; a large one (e.g. a fraction
        // of the gap, which junk tail ratios can inflate enormously)
        // would slow the contraction (s-l1)/(s-l2) to a crawl
        double margin = std::max(1e-6 * (1.0 + std::abs(cw.hi)),
                                 std::pow(10.0, stale) * 1e-12 *
                                     (1.0 + std::abs(cw.hi)));
        double s = cw.hi + margin;
        ShiftedSolver solver(A, s);
        if (!solver.ok()) {
            // factorization at a near-critical shift failed; retreat
            ++stale;
            if (stale > 12) throw NotConverged(iters, cw.resid);
            continue;
        }
        double prev_resid = cw.resid;
        for (int k = 0; k < 4 && iters < max_iter; ++k) {
            Eigen::VectorXd y;
            if (!solver.solve(v, y) || !(y.maxCoeff() > 0.0)) break;
            v = std::move(y);
            normalize_positive(v);
            cw = cw_bounds(A, v, work);
            ++iters;
            if (converged(cw)) break;
        }
        stale = cw.resid < 0.5 * prev_resid ? 0 : stale + 1;
        if (stale > 12) break;
    }

    // A residual stall slightly above tol is the signature of a
    // near-degenerate Perron pair (e.g. two symmetric boundary wells with
    // exponentially small coupling): the eigenvalue is accurate to the
    // pair splitting even though the eigenvector cannot resolve the
    // degenerate subspace. Accept those; the achieved residual is
    // reported in the result.
    if (!converged(cw) && !(cw.resid <= 1e-7 * (1.0 + std::abs(cw.lambda_hat))))
        throw NotConverged(iters, cw.resid);

    double lambda = cw.lambda_hat;
    work.noalias() = A * v;
    double resid = (work - lambda * v).lpNorm<Eigen::Infinity>() /
                   v.lpNorm<Eigen::Infinity>();
    return {lambda, std::move(v), resid, iters};
}

Eigen::VectorXd solve_shifted(const SpMat& A, double s,
                              const Eigen::VectorXd& rhs) {
    ShiftedSolver solver(A, s);
    if (!solver.ok())
        throw NotConverged(0, std::numeric_limits<double>::quiet_NaN());
    Eigen::VectorXd out;
    if (!solver.solve(rhs, out))
        throw NotConverged(0, std::numeric_limits<double>::quiet_NaN());
    return out;
}

EigenPair principal_eigenpair(const DiscreteOperator& op, double tol,
                              int max_iter,
                              const Eigen::VectorXd* warm_start) {
    if (!op.irreducible)
        throw DisconnectedInterior("interior stencil graph is disconnected");

    MatrixEigenResult r = [&] {
        if (warm_start) {
            // a warm start far from the true eigenvector can strand the
            // shifted iteration; fall back to a cold start before failing
            try {
                return perron_solve(op.A, tol, std::min(max_iter, 2000),
                                    warm_start);
            } catch (const NotConverged&) {
            }
        }
        return perron_solve(op.A, tol, max_iter, nullptr);
    }();

    EigenPair pair;
    pair.lambda = r.lambda;
    pair.psi = std::move(r.v);
    pair.residual = r.residual;
    pair.iterations = r.iterations;

    int norm_node = op.grid.origin_row;
    if (norm_node < 0) {
        Eigen::Index idx;
        pair.psi.maxCoeff(&idx);
        norm_node = static_cast<int>(idx);
    }
    pair.normalization_node = norm_node;
    pair.psi /= pair.psi[norm_node];
    return pair;
}

namespace {

std::vector<std::vector<int>> grid_components(const Grid& grid) {
    std::vector<std::vector<int>> comps;
    std::vector<char> seen(grid.rows(), 0);
    for (int start = 0; start < grid.rows(); ++start) {
        if (seen[start]) continue;
        comps.emplace_back();
        std::vector<int> stack{start};
        seen[start] = 1;
        while (!stack.empty()) {
            int row = stack.back();
            stack.pop_back();
            comps.back().push_back(row);
            for (int ax = 0; ax < grid.dim; ++ax)
                for (int dir : {-1, +1}) {
                    int nb = grid.neighbor(row, ax, dir);
                    if (nb >= 0 && !seen[nb]) {
                        seen[nb] = 1;
                        stack.push_back(nb);
                    }
                }
        }
    }
    return comps;
}

}  // namespace

ExteriorLadder exterior_eigenvalue(const CoefficientSet& coeffs, double r,
                                   std::span<const double> R_ladder,
                                   int n_per_axis, double tol) {
    ExteriorLadder out;
    for (double R : R_ladder) {
        if (!(R > r)) throw BadRadius("annulus ladder radii must exceed r");
        Grid grid = build_grid(coeffs.dim, R, r, n_per_axis);
        DiscreteOperator op = assemble(grid, coeffs);
        double lambda;
        if (op.irreducible) {
            lambda = perron_solve(op.A, tol, 200000).lambda;
        } else {
            lambda = -std::numeric_limits<double>::infinity();
            for (const auto& comp : grid_components(grid)) {
                std::vector<int> remap(grid.rows(), -1);
                for (std::size_t k = 0; k < comp.size(); ++k)
                    remap[comp[k]] = static_cast<int>(k);
                std::vector<Eigen::Triplet<double>> trip;
                for (int row : comp)
                    for (SpMat::InnerIterator it(op.A, row); it; ++it)
                        if (remap[it.col()] >= 0)
                            trip.emplace_back(remap[row], remap[it.col()],
                                              it.value());
                SpMat sub(comp.size(), comp.size());
                sub.setFromTriplets(trip.begin(), trip.end());
                lambda = std::max(lambda,
                                  perron_solve(sub, tol, 200000).lambda);
            }
        }
        out.rungs.emplace_back(R, lambda);
    }
    out.value = out.rungs.back().second;
    return out;
}

}  // namespace eigendrift
