#include "eigendrift/beta.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "eigendrift/eig.hpp"

namespace eigendrift {

namespace {

CoefficientSet scaled_f(const CoefficientSet& coeffs, double beta) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", beta);
    return coeffs.with_f(Expression::parse(
        "(" + std::string(buf) + ")*(" + coeffs.f.serialize() + ")"));
}

double richardson_pair(double r1, double l1, double r2, double l2) {
    double w1 = 1.0 / (r1 * r1), w2 = 1.0 / (r2 * r2);
    if (w1 == w2) return l2;
    return (l2 * w1 - l1 * w2) / (w1 - w2);
}

void check_f_vanishes(const Expression& f, const Grid& g) {
    double sup = 0.0, ring_max = 0.0;
    for (int row = 0; row < g.rows(); ++row) {
        Bindings b{g.nodes[row][0], {}, {}};
        if (g.dim == 2) b.x2 = g.nodes[row][1];
        double v = std::abs(f.evaluate(b));
        sup = std::max(sup, v);
        bool ring = false;
        for (int ax = 0; ax < g.dim && !ring; ++ax)
            for (int dir : {-1, +1})
                if (g.neighbor(row, ax, dir) < 0) {
                    ring = true;
                    break;
                }
        if (ring) ring_max = std::max(ring_max, v);
    }
    if (sup > 0.0 && ring_max >= 0.01 * sup)
        throw NonVanishingBump(
            "f does not vanish toward the grid boundary; pass the override "
            "to probe it anyway");
}

struct GridPair {
    Grid g1, g2;
};

GridPair curve_grids(int dim, const LadderConfig& lad) {
    int k2 = std::max(1, lad.max_rungs - 1);
    double r2 = lad.r0 * std::pow(lad.growth, k2);
    double r1 = lad.r0 * std::pow(lad.growth, k2 - 1);
    return {build_grid(dim, r1, 0.0, lad.n_for_radius(r1)),
            build_grid(dim, r2, 0.0, lad.n_for_radius(r2))};
}

// lambda(beta f) on both grids; warm starts carried by the caller
struct TwoGridSolve {
    double raw, ext;
};

TwoGridSolve solve_beta(const CoefficientSet& coeffs, double beta,
                        const GridPair& gp, const LadderConfig& lad,
                        Eigen::VectorXd* warm2) {
    CoefficientSet cs = scaled_f(coeffs, beta);
    EigenPair p2 = principal_eigenpair(assemble(gp.g2, cs), lad.tol_eig,
                                       lad.max_iter,
                                       warm2 && warm2->size() ? warm2 : nullptr);
    EigenPair p1 =
        principal_eigenpair(assemble(gp.g1, cs), lad.tol_eig, lad.max_iter);
    if (warm2) *warm2 = p2.psi;
    return {p2.lambda, richardson_pair(gp.g1.radius, p1.lambda, gp.g2.radius,
                                       p2.lambda)};
}

}  // namespace

BetaCurve lambda_curve(const CoefficientSet& coeffs,
                       const std::vector<double>& betas,
                       const CurveConfig& cfg) {
    if (betas.empty()) throw Error("lambda_curve needs at least one beta");
    GridPair gp = curve_grids(coeffs.dim, cfg.ladder);
    if (!cfg.skip_bump_check) check_f_vanishes(coeffs.f, gp.g2);

    BetaCurve curve;
    curve.betas = betas;
    curve.slope_tol = cfg.slope_tol;

    Eigen::VectorXd warm;
    for (double beta : betas) {
        TwoGridSolve s = solve_beta(coeffs, beta, gp, cfg.ladder, &warm);
        curve.lambdas.push_back(s.raw);
        curve.lambdas_extrapolated.push_back(s.ext);
        curve.converged.push_back(
            std::abs(s.ext - s.raw) < 10.0 * cfg.tol_outer ? 1 : 0);
    }
    curve.lambda_c = *std::min_element(curve.lambdas_extrapolated.begin(),
                                       curve.lambdas_extrapolated.end());

    const int n = static_cast<int>(betas.size());
    curve.slopes.resize(n);
    for (int i = 0; i < n; ++i) {
        int lo = std::max(0, i - 1), hi = std::min(n - 1, i + 1);
        if (hi == lo)
            curve.slopes[i] = 0.0;
        else
            curve.slopes[i] = (curve.lambdas_extrapolated[hi] -
                               curve.lambdas_extrapolated[lo]) /
                              (betas[hi] - betas[lo]);
    }

    // beta_c: the largest flat beta, refined by bisection when a steep
    // neighbor brackets the breakpoint
    int flat = -1;
    for (int i = 0; i < n; ++i)
        if (curve.slopes[i] < cfg.slope_tol) flat = i;
    if (flat < 0) {
        curve.beta_c_estimate = -std::numeric_limits<double>::infinity();
        return curve;
    }
    if (flat == n - 1) {
        curve.beta_c_estimate = betas[flat];  // flat through the end: a
        return curve;                         // lower bound for beta_c
    }
    double lo = betas[flat], hi = betas[flat + 1];
    for (int d = 0; d < cfg.bisect_depth && hi - lo > 1e-8; ++d) {
        double mid = 0.5 * (lo + hi);
        double db = std::max(1e-8, (hi - lo) / 4.0);
        TwoGridSolve sp = solve_beta(coeffs, mid + db, gp, cfg.ladder, &warm);
        TwoGridSolve sm = solve_beta(coeffs, mid - db, gp, cfg.ladder, &warm);
        double slope = (sp.ext - sm.ext) / (2.0 * db);
        (slope < cfg.slope_tol ? lo : hi) = mid;
    }
    curve.beta_c_estimate = 0.5 * (lo + hi);
    return curve;
}

double StationaryDensity::integral(const std::vector<double>& values) const {
    double s = 0.0, c = 0.0;
    const double vol = grid.cell_volume();
    for (int i = 0; i < grid.rows(); ++i) {
        double y = eta[i] * values[i] * vol - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

StationaryDensity stationary_density(const DriftLike& drift,
                                     const CoefficientSet& coeffs,
                                     const Grid& grid, double tol) {
    NodeFields fields;
    const int n = grid.rows();
    fields.a.resize(n);
    fields.b.resize(n);
    fields.f.assign(n, 0.0);
    for (int row = 0; row < n; ++row) {
        Bindings bnd{grid.nodes[row][0], {}, {}};
        if (grid.dim == 2) bnd.x2 = grid.nodes[row][1];
        for (int ax = 0; ax < grid.dim; ++ax)
            fields.a[row][ax] = coeffs.a[ax].evaluate(bnd);
        if (const auto* fld = std::get_if<GridVectorField>(&drift)) {
            Point d = fld->at(grid.nodes[row]);
            fields.b[row] = {d[0], d[1]};
        } else {
            const auto& ex = std::get<std::vector<Expression>>(drift);
            for (int ax = 0; ax < grid.dim; ++ax)
                fields.b[row][ax] = ex[ax].evaluate(bnd);
        }
    }
    DiscreteOperator op =
        assemble(grid, fields, coeffs.ellipticity_floor, coeffs.f_lower_bound);
    if (!op.irreducible)
        throw DisconnectedInterior("stationary density needs a connected grid");

    Eigen::SparseMatrix<double, Eigen::RowMajor> At = op.A.transpose();
    MatrixEigenResult r = perron_solve(At, tol, 200000);

    StationaryDensity sd;
    sd.grid = grid;
    sd.lambda = r.lambda;
    sd.residual = (At * r.v).lpNorm<Eigen::Infinity>() /
                  r.v.lpNorm<Eigen::Infinity>();

    double mass = 0.0;
    for (int i = 0; i < n; ++i) mass += r.v[i];
    sd.eta.resize(n);
    const double vol = grid.cell_volume();
    for (int i = 0; i < n; ++i) sd.eta[i] = r.v[i] / (mass * vol);

    double shell = 0.0;
    const double cut = 0.9 * grid.radius;
    for (int i = 0; i < n; ++i) {
        const Point& p = grid.nodes[i];
        double rr = std::sqrt(p[0] * p[0] + p[1] * p[1]);
        if (rr >= cut) shell += r.v[i];
    }
    // Two transience signals: mass escaping to the boundary shell, or a
    // strongly negative Perron value of the transpose (a true invariant
    // density annihilates the generator, so its Dirichlet approximation
    // has lambda ~ -0; a large exit rate means no mass is retained).
    sd.transience_suspected = shell > 0.25 * mass || r.lambda < -1e-3;
    return sd;
}

namespace {

std::vector<double> sample_scalar(const Grid& g, const Expression& e) {
    std::vector<double> out(g.rows());
    for (int row = 0; row < g.rows(); ++row) {
        Bindings b{g.nodes[row][0], {}, {}};
        if (g.dim == 2) b.x2 = g.nodes[row][1];
        out[row] = e.evaluate(b);
    }
    return out;
}

}  // namespace

ErgodicIdentity ergodic_identity_check(const CoefficientSet& coeffs,
                                       double beta,
                                       const LadderConfig& ladder) {
    GroundState gs = lambda_star(scaled_f(coeffs, beta), ladder);
    ErgodicIdentity out;
    out.lhs = gs.lambda_star;
    out.density =
        stationary_density(gs.twisted_drift_field(), coeffs, gs.grid);

    const Grid& g = gs.grid;
    std::vector<double> fvals = sample_scalar(g, coeffs.f);
    std::vector<double> integrand(g.rows());
    for (int row = 0; row < g.rows(); ++row) {
        Bindings b{g.nodes[row][0], {}, {}};
        if (g.dim == 2) b.x2 = g.nodes[row][1];
        double grad2 = 0.0;
        for (int ax = 0; ax < g.dim; ++ax) {
            double d = gs.grad_log_psi[row][ax];
            grad2 += coeffs.a[ax].evaluate(b) * d * d;
        }
        integrand[row] = beta * fvals[row] - grad2;
    }
    out.rhs = out.density.integral(integrand);
    out.residual = std::abs(out.lhs - out.rhs);

    if (out.lhs <= 1e-12) {
        double lambda0 =
            beta == 0.0
                ? out.lhs
                : lambda_star(coeffs.with_f(Expression::constant(0.0)), ladder)
                      .lambda_star;
        if (lambda0 < -1e-3)
            out.hypothesis_violated =
                "Lambda_beta <= 0 but the base process is transient "
                "(lambda*(0) < 0)";
    }
    if (out.density.transience_suspected) {
        std::string msg = "twisted stationary mass concentrates at the "
                          "grid boundary";
        out.hypothesis_violated = out.hypothesis_violated
                                      ? *out.hypothesis_violated + "; " + msg
                                      : msg;
    }
    return out;
}

DerivativeCheck derivative_check(const CoefficientSet& coeffs, double beta,
                                 double d_beta, const LadderConfig& ladder) {
    if (!(d_beta > 0.0)) throw Error("d_beta must be positive");
    GroundState gs = lambda_star(scaled_f(coeffs, beta), ladder);
    const Grid& g = gs.grid;

    CoefficientSet cs_p = scaled_f(coeffs, beta + d_beta);
    CoefficientSet cs_m = scaled_f(coeffs, beta - d_beta);
    EigenPair pp = principal_eigenpair(assemble(g, cs_p), ladder.tol_eig,
                                       ladder.max_iter, &gs.psi_star);
    EigenPair pm = principal_eigenpair(assemble(g, cs_m), ladder.tol_eig,
                                       ladder.max_iter, &gs.psi_star);

    DerivativeCheck out;
    out.fd_slope = (pp.lambda - pm.lambda) / (2.0 * d_beta);

    StationaryDensity mu =
        stationary_density(gs.twisted_drift_field(), coeffs, g);
    std::vector<double> fvals = sample_scalar(g, coeffs.f);
    out.mu_f = mu.integral(fvals);
    out.residual = std::abs(out.fd_slope - out.mu_f);

    // sandwich ET2.8A with Psi~ = Psi*_{beta-eps} / Psi*_beta
    std::vector<double> tilde(g.rows()), f_tilde(g.rows());
    for (int row = 0; row < g.rows(); ++row) {
        tilde[row] = pm.psi[row] / gs.psi_star[row];
        f_tilde[row] = fvals[row] * tilde[row];
    }
    double denom = mu.integral(tilde);
    out.sandwich_lower =
        denom > 0.0 ? d_beta * mu.integral(f_tilde) / denom : 0.0;
    out.left_increment = gs.lambda_star - pm.lambda;
    out.sandwich_ok = out.sandwich_lower <= out.left_increment + 1e-8;
    return out;
}

DualityResidual duality_residual(const CoefficientSet& coeffs, double beta,
                                 const ControlField& v,
                                 const LadderConfig& ladder) {
    GroundState gs = lambda_star(scaled_f(coeffs, beta), ladder);
    const Grid& g = gs.grid;
    const int n = g.rows();

    std::vector<Point> vv(n);
    for (int row = 0; row < n; ++row) {
        if (const auto* fld = std::get_if<GridVectorField>(&v)) {
            vv[row] = fld->at(g.nodes[row]);
        } else {
            const auto& ex = std::get<std::vector<Expression>>(v);
            Bindings b{g.nodes[row][0], {}, {}};
            if (g.dim == 2) b.x2 = g.nodes[row][1];
            for (int ax = 0; ax < g.dim; ++ax)
                vv[row][ax] = ex[ax].evaluate(b);
        }
    }

    // controlled drift b + 2 a v
    GridVectorField drift;
    drift.grid = g;
    for (int ax = 0; ax < g.dim; ++ax) drift.comps[ax].resize(n);
    for (int row = 0; row < n; ++row) {
        Bindings b{g.nodes[row][0], {}, {}};
        if (g.dim == 2) b.x2 = g.nodes[row][1];
        for (int ax = 0; ax < g.dim; ++ax)
            drift.comps[ax][row] = coeffs.b[ax].evaluate(b) +
                                   2.0 * coeffs.a[ax].evaluate(b) *
                                       vv[row][ax];
    }

    StationaryDensity eta = stationary_density(drift, coeffs, g);
    if (eta.transience_suspected)
        throw HypothesisViolated(
            "the controlled diffusion has no stationary density on the "
            "grid (mass escapes to the boundary)");

    std::vector<double> fvals = sample_scalar(g, coeffs.f);
    std::vector<double> F(n), ex2(n);
    for (int row = 0; row < n; ++row) {
        Bindings b{g.nodes[row][0], {}, {}};
        if (g.dim == 2) b.x2 = g.nodes[row][1];
        double v2 = 0.0, d2 = 0.0;
        for (int ax = 0; ax < g.dim; ++ax) {
            double av = coeffs.a[ax].evaluate(b);
            double dvi = vv[row][ax] - gs.grad_log_psi[row][ax];
            v2 += av * vv[row][ax] * vv[row][ax];
            d2 += av * dvi * dvi;
        }
        F[row] = v2 - beta * fvals[row];
        ex2[row] = d2;
    }

    DualityResidual out;
    out.lambda_beta = gs.lambda_star;
    out.cost = eta.integral(F);
    out.excess = eta.integral(ex2);
    out.identity_rhs = -gs.lambda_star + out.excess;
    out.residual = std::abs(out.cost - out.identity_rhs);
    return out;
}

}  // namespace eigendrift
