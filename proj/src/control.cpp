#include "eigendrift/control.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace eigendrift {

namespace {

struct Tables {
    // per node: a per axis; per node x action: b per axis and c
    std::vector<std::array<double, 2>> a;
    std::vector<std::vector<std::array<double, 2>>> b;  // [row][action]
    std::vector<std::vector<double>> c;                 // [row][action]
};

Tables tabulate(const ControlProblem& pb) {
    const Grid& g = pb.grid;
    const int n = g.rows();
    const int na = static_cast<int>(pb.actions.size());
    if (na == 0) throw Error("action set is empty");
    if (!pb.coeffs.c) throw Error("control problem needs a running cost c");
    if (static_cast<int>(pb.coeffs.b.size()) != g.dim)
        throw Error("drift has wrong dimension for the grid");

    Tables t;
    t.a.resize(n);
    t.b.assign(n, std::vector<std::array<double, 2>>(na, {0.0, 0.0}));
    t.c.assign(n, std::vector<double>(na, 0.0));
    for (int row = 0; row < n; ++row) {
        Bindings bn{g.nodes[row][0], {}, {}};
        if (g.dim == 2) bn.x2 = g.nodes[row][1];
        for (int ax = 0; ax < g.dim; ++ax)
            t.a[row][ax] = pb.coeffs.a[ax].evaluate(bn);
        for (int k = 0; k < na; ++k) {
            bn.u = pb.actions[k];
            for (int ax = 0; ax < g.dim; ++ax)
                t.b[row][k][ax] = pb.coeffs.b[ax].evaluate(bn);
            double cv = pb.coeffs.c->evaluate(bn);
            if (cv < 0.0)
                throw NotPositive("running cost is negative at a grid node");
            t.c[row][k] = cv;
        }
    }
    return t;
}

NodeFields frozen_fields(const Tables& t, const Policy& v) {
    NodeFields f;
    const int n = static_cast<int>(t.a.size());
    f.a = t.a;
    f.b.resize(n);
    f.f.resize(n);
    for (int row = 0; row < n; ++row) {
        f.b[row] = t.b[row][v[row]];
        f.f[row] = t.c[row][v[row]];
    }
    return f;
}

EigenPair frozen_solve(const ControlProblem& pb, const Tables& t,
                       const Policy& v, const Eigen::VectorXd* warm) {
    DiscreteOperator op =
        assemble(pb.grid, frozen_fields(t, v), pb.coeffs.ellipticity_floor,
                 pb.coeffs.f_lower_bound);
    return principal_eigenpair(op, pb.tol, pb.max_iter, warm);
}

void normalize_at_origin(const Grid& g, Eigen::VectorXd& V) {
    int row = g.origin_row >= 0 ? g.origin_row : 0;
    if (V[row] > 0.0) V /= V[row];
}

// central-difference gradient with the Dirichlet-zero exterior the
// discrete operator also sees
Point grad_at(const Grid& g, const Eigen::VectorXd& V, int row) {
    Point out{0.0, 0.0};
    for (int ax = 0; ax < g.dim; ++ax) {
        int np = g.neighbor(row, ax, +1), nm = g.neighbor(row, ax, -1);
        double vp = np >= 0 ? V[np] : 0.0;
        double vm = nm >= 0 ? V[nm] : 0.0;
        out[ax] = (vp - vm) / (2.0 * g.h);
    }
    return out;
}

Policy improve(const ControlProblem& pb, const Tables& t,
               const Eigen::VectorXd& V) {
    const Grid& g = pb.grid;
    const int na = static_cast<int>(pb.actions.size());
    Policy next(g.rows(), 0);
    for (int row = 0; row < g.rows(); ++row) {
        Point dV = grad_at(g, V, row);
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int k = 0; k < na; ++k) {
            double h = t.c[row][k] * V[row];
            for (int ax = 0; ax < g.dim; ++ax)
                h += t.b[row][k][ax] * dV[ax];
            if (h < best) {
                best = h;
                arg = k;
            }
        }
        next[row] = arg;
    }
    return next;
}

}  // namespace

HJBSolution solve_hjb(const ControlProblem& problem,
                      const std::optional<Policy>& initial_policy) {
    Tables t = tabulate(problem);
    const int n = problem.grid.rows();
    const int na = static_cast<int>(problem.actions.size());

    Policy v;
    if (initial_policy) {
        v = *initial_policy;
        if (static_cast<int>(v.size()) != n)
            throw Error("initial policy has wrong size");
        for (int a : v)
            if (a < 0 || a >= na) throw Error("initial policy action index out of range");
    } else {
        v.resize(n);
        for (int row = 0; row < n; ++row) {
            int arg = 0;
            for (int k = 1; k < na; ++k)
                if (t.c[row][k] < t.c[row][arg]) arg = k;
            v[row] = arg;
        }
    }

    HJBSolution best;
    best.lambda_star = std::numeric_limits<double>::infinity();

    HJBSolution sol;
    Eigen::VectorXd warm;
    double prev_lambda = std::numeric_limits<double>::quiet_NaN();
    int n_changed = 0;
    for (int it = 0; it < 100; ++it) {
        EigenPair p = frozen_solve(problem, t, v,
                                   warm.size() ? &warm : nullptr);
        warm = p.psi;
        sol.trace.push_back({it, p.lambda, n_changed});
        if (std::isfinite(prev_lambda) && p.lambda > prev_lambda + 1e-12)
            sol.monotone = false;
        if (p.lambda < best.lambda_star) {
            best.lambda_star = p.lambda;
            best.V = p.psi;
            best.policy = v;
        }
        if (std::isfinite(prev_lambda) &&
            std::abs(p.lambda - prev_lambda) < 1e-10) {
            sol.converged = true;
            prev_lambda = p.lambda;
            break;
        }
        prev_lambda = p.lambda;

        Policy next = improve(problem, t, p.psi);
        n_changed = 0;
        for (int row = 0; row < n; ++row)
            if (next[row] != v[row]) ++n_changed;
        if (n_changed == 0) {
            sol.converged = true;
            break;
        }
        v = std::move(next);
    }

    sol.lambda_star = best.lambda_star;
    sol.V = best.V;
    sol.policy = best.policy;
    normalize_at_origin(problem.grid, sol.V);
    return sol;
}

EigenPair policy_eigenpair(const ControlProblem& problem, const Policy& v) {
    Tables t = tabulate(problem);
    if (static_cast<int>(v.size()) != problem.grid.rows())
        throw Error("policy has wrong size");
    return frozen_solve(problem, t, v, nullptr);
}

OracleResult enumerate_policies_oracle(const ControlProblem& problem) {
    Tables t = tabulate(problem);
    const int n = problem.grid.rows();
    const long na = static_cast<long>(problem.actions.size());
    double total_d = std::pow(static_cast<double>(na), n);
    if (total_d > 600000.0)
        throw TooLarge("policy space exceeds 600000; shrink the grid or "
                       "the action set");
    const long total = static_cast<long>(std::llround(total_d));

    OracleResult out;
    out.n_policies = total;
    out.lambda_min = std::numeric_limits<double>::infinity();

    Policy v(n, 0);
    for (long idx = 0; idx < total; ++idx) {
        DiscreteOperator op =
            assemble(problem.grid, frozen_fields(t, v),
                     problem.coeffs.ellipticity_floor,
                     problem.coeffs.f_lower_bound);
        Eigen::MatrixXd dense(op.A);
        Eigen::EigenSolver<Eigen::MatrixXd> es(dense);
        double lam = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < dense.rows(); ++i)
            lam = std::max(lam, es.eigenvalues()[i].real());
        if (lam < out.lambda_min) {
            out.lambda_min = lam;
            out.argmin = v;
        }
        // mixed-radix increment
        for (int pos = 0; pos < n; ++pos) {
            if (++v[pos] < na) break;
            v[pos] = 0;
        }
    }
    return out;
}

ContinuityReport continuity_probe(const ControlProblem& problem,
                                  const Policy& base,
                                  const Perturbation& perturbation,
                                  const std::vector<double>& t_ladder) {
    Tables t = tabulate(problem);
    const int n = problem.grid.rows();
    if (static_cast<int>(base.size()) != n)
        throw Error("base policy has wrong size");
    if (perturbation.nodes.size() != perturbation.new_actions.size())
        throw Error("perturbation node/action lists differ in length");

    NodeFields f0 = frozen_fields(t, base);
    ContinuityReport rep;
    rep.t_values = t_ladder;

    Eigen::VectorXd warm;
    for (double tt : t_ladder) {
        NodeFields f = f0;
        for (std::size_t i = 0; i < perturbation.nodes.size(); ++i) {
            int row = perturbation.nodes[i];
            int k = perturbation.new_actions[i];
            for (int ax = 0; ax < problem.grid.dim; ++ax)
                f.b[row][ax] =
                    (1.0 - tt) * f0.b[row][ax] + tt * t.b[row][k][ax];
            f.f[row] = (1.0 - tt) * f0.f[row] + tt * t.c[row][k];
        }
        DiscreteOperator op =
            assemble(problem.grid, f, problem.coeffs.ellipticity_floor,
                     problem.coeffs.f_lower_bound);
        EigenPair p = principal_eigenpair(op, problem.tol, problem.max_iter,
                                          warm.size() ? &warm : nullptr);
        warm = p.psi;
        rep.lambdas.push_back(p.lambda);
    }
    for (std::size_t i = 1; i < rep.lambdas.size(); ++i)
        rep.max_jump =
            std::max(rep.max_jump, std::abs(rep.lambdas[i] - rep.lambdas[i - 1]));
    return rep;
}

}  // namespace eigendrift
