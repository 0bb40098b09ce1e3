#include "eigendrift/exhaustion.hpp"

#include <cmath>

namespace eigendrift {

int LadderConfig::n_for_radius(double r) const {
    int half = std::max(2, static_cast<int>(std::ceil(r * n_per_unit_length)));
    return 2 * half + 1;
}

std::optional<double> richardson_r2(const std::vector<LadderRung>& ladder) {
    if (ladder.size() < 2) return {};
    const auto& a = ladder[ladder.size() - 2];
    const auto& b = ladder.back();
    double wa = 1.0 / (a.r * a.r), wb = 1.0 / (b.r * b.r);
    if (wa == wb) return {};
    // lambda(r) = lambda_inf + c / r^2
    return (b.lambda * wa - a.lambda * wb) / (wa - wb);
}

void gradient_field(GroundState& gs, const CoefficientSet& coeffs) {
    const Grid& g = gs.grid;
    const int n = g.rows();
    gs.log_psi.resize(n);
    for (int i = 0; i < n; ++i) gs.log_psi[i] = std::log(gs.psi_star[i]);

    gs.grad_log_psi.assign(n, {0.0, 0.0});
    gs.twisted_drift.assign(n, {0.0, 0.0});

    for (int row = 0; row < n; ++row) {
        Bindings bnd{g.nodes[row][0], {}, {}};
        if (g.dim == 2) bnd.x2 = g.nodes[row][1];
        for (int ax = 0; ax < g.dim; ++ax) {
            int up = g.neighbor(row, ax, +1);
            int dn = g.neighbor(row, ax, -1);
            double d;
            if (up >= 0 && dn >= 0)
                d = (gs.log_psi[up] - gs.log_psi[dn]) / (2.0 * g.h);
            else if (up >= 0)
                d = (gs.log_psi[up] - gs.log_psi[row]) / g.h;
            else if (dn >= 0)
                d = (gs.log_psi[row] - gs.log_psi[dn]) / g.h;
            else
                d = 0.0;
            gs.grad_log_psi[row][ax] = d;
            double av = coeffs.a[ax].evaluate(bnd);
            double bv = coeffs.b[ax].evaluate(bnd);
            gs.twisted_drift[row][ax] = bv + 2.0 * av * d;
        }
    }
}

GroundState lambda_star(const CoefficientSet& coeffs, const LadderConfig& cfg,
                        double tol_outer) {
    GroundState gs;
    Eigen::VectorXd warm;
    Grid prev_grid;
    double prev_lambda = 0.0;
    double prev_increment = 0.0;
    EigenPair pair;

    for (int k = 0; k < cfg.max_rungs; ++k) {
        double r = cfg.r0 * std::pow(cfg.growth, k);
        int n = cfg.n_for_radius(r);
        Grid grid = build_grid(coeffs.dim, r, 0.0, n);
        DiscreteOperator op = assemble(grid, coeffs);

        // warm start by injecting the previous eigenfunction
        const Eigen::VectorXd* ws = nullptr;
        Eigen::VectorXd injected;
        if (warm.size() > 0) {
            std::vector<double> prev(warm.data(), warm.data() + warm.size());
            injected.resize(grid.rows());
            for (int row = 0; row < grid.rows(); ++row) {
                double v =
                    detail::interpolate(prev_grid, prev, grid.nodes[row]);
                injected[row] = std::max(v, 1e-12);
            }
            ws = &injected;
        }

        pair = principal_eigenpair(op, cfg.tol_eig, cfg.max_iter, ws);
        gs.ladder.push_back({r, n, pair.lambda});

        if (k > 0) {
            double inc = pair.lambda - prev_lambda;
            // h is re-rounded to an integer node count per rung, so once
            // the true increment falls below the O(h^2) bias difference
            // between rungs the measured increment can be slightly
            // negative; only a decrease beyond that noise floor means the
            // ladder is genuinely broken
            if (inc < -1e-6 * (1.0 + std::abs(prev_lambda)))
                throw Error("exhaustion ladder is not monotone");
            if (std::abs(inc) < tol_outer) {
                gs.converged = true;
                gs.grid = std::move(grid);
                gs.psi_star = std::move(pair.psi);
                gs.residual = pair.residual;
                break;
            }
            if (k == cfg.max_rungs - 1 && inc > 10.0 * tol_outer &&
                prev_increment > 0.0 && inc / prev_increment >= 0.9)
                throw LadderDiverged(
                    "Dirichlet eigenvalues keep increasing; lambda_star "
                    "appears infinite");
            prev_increment = inc;
        }
        prev_lambda = pair.lambda;
        warm = pair.psi;
        prev_grid = grid;
        if (k == cfg.max_rungs - 1) {
            gs.grid = std::move(grid);
            gs.psi_star = std::move(pair.psi);
            gs.residual = pair.residual;
        }
        if (pair.lambda > cfg.divergence_cap)
            throw LadderDiverged("Dirichlet eigenvalue exceeded the cap");
    }

    gs.lambda_star = gs.ladder.back().lambda;
    gs.extrapolated = richardson_r2(gs.ladder);

    // renormalize at the origin and build the derived fields
    if (gs.grid.origin_row >= 0) gs.psi_star /= gs.psi_star[gs.grid.origin_row];
    gradient_field(gs, coeffs);
    return gs;
}

}  // namespace eigendrift
