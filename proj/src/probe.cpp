#include "eigendrift/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eigendrift {

const char* to_string(MonoVerdict v) {
    switch (v) {
        case MonoVerdict::StrictAtF: return "StrictAtF";
        case MonoVerdict::StrictOnRightOnly: return "StrictOnRightOnly";
        case MonoVerdict::Flat: return "Flat";
        case MonoVerdict::Inconclusive: return "Inconclusive";
    }
    return "?";
}

const char* to_string(GsClass v) {
    switch (v) {
        case GsClass::ExponentiallyErgodic: return "ExponentiallyErgodic";
        case GsClass::RecurrentNotExpErgodic: return "RecurrentNotExpErgodic";
        case GsClass::Transient: return "Transient";
        case GsClass::Inconclusive: return "Inconclusive";
    }
    return "?";
}

Expression default_bump(int dim) {
    return Expression::parse(dim == 2 ? "exp(-(x1^2)-(x2^2))"
                                      : "exp(-(x1^2))");
}

namespace {

double richardson_pair(double r1, double l1, double r2, double l2) {
    double w1 = 1.0 / (r1 * r1), w2 = 1.0 / (r2 * r2);
    if (w1 == w2) return l2;
    return (l2 * w1 - l1 * w2) / (w1 - w2);
}

bool on_boundary_ring(const Grid& g, int row) {
    for (int ax = 0; ax < g.dim; ++ax)
        for (int dir : {-1, +1})
            if (g.neighbor(row, ax, dir) < 0) return true;
    return false;
}

std::vector<int> boundary_ring(const Grid& g) {
    std::vector<int> ring;
    for (int row = 0; row < g.rows(); ++row)
        if (on_boundary_ring(g, row)) ring.push_back(row);
    return ring;
}

void check_bump(const Expression& h, const Grid& g) {
    double sup = 0.0;
    std::vector<double> vals(g.rows());
    for (int row = 0; row < g.rows(); ++row) {
        Bindings b{g.nodes[row][0], {}, {}};
        if (g.dim == 2) b.x2 = g.nodes[row][1];
        double v = h.evaluate(b);
        if (v < 0.0)
            throw NonVanishingBump("bump h must be nonnegative");
        vals[row] = v;
        sup = std::max(sup, v);
    }
    if (sup == 0.0) throw NonVanishingBump("bump h is identically zero");
    double ring_max = 0.0;
    for (int row : boundary_ring(g)) ring_max = std::max(ring_max, vals[row]);
    if (ring_max >= 0.01 * sup)
        throw NonVanishingBump(
            "bump h does not vanish at the grid boundary (max over the "
            "boundary ring exceeds 1% of its sup)");
}

double sup_on_grid(const Expression& h, const Grid& g) {
    double sup = -std::numeric_limits<double>::infinity();
    for (int row = 0; row < g.rows(); ++row) {
        Bindings b{g.nodes[row][0], {}, {}};
        if (g.dim == 2) b.x2 = g.nodes[row][1];
        sup = std::max(sup, h.evaluate(b));
    }
    return sup;
}

}  // namespace

MonotonicityReport monotonicity_probe(const CoefficientSet& coeffs,
                                      const LadderConfig& ladder,
                                      std::optional<Expression> bump,
                                      std::vector<double> eps,
                                      double tol_mono) {
    GroundState gs = lambda_star(coeffs, ladder);
    const auto& rungs = gs.ladder;
    const LadderRung& last = rungs.back();
    const LadderRung* prev =
        rungs.size() >= 2 ? &rungs[rungs.size() - 2] : nullptr;

    Grid g2 = build_grid(coeffs.dim, last.r, 0.0, last.n_per_axis);
    Grid g1 = prev ? build_grid(coeffs.dim, prev->r, 0.0, prev->n_per_axis)
                   : g2;

    Expression h = bump ? *bump : default_bump(coeffs.dim);
    check_bump(h, g2);

    MonotonicityReport rep;
    rep.bump_text = h.serialize();
    rep.sup_bump = sup_on_grid(h, g2);
    rep.tol_mono = tol_mono;
    rep.eps = std::move(eps);
    rep.lambda_star_f_raw = last.lambda;
    rep.lambda_star_f =
        prev ? richardson_pair(prev->r, prev->lambda, last.r, last.lambda)
             : last.lambda;

    auto solve_pair = [&](double scale, double& raw, double& ext) {
        CoefficientSet cs = coeffs.with_shifted_f(scale, h);
        EigenPair p2 = principal_eigenpair(assemble(g2, cs), ladder.tol_eig,
                                           ladder.max_iter, &gs.psi_star);
        raw = p2.lambda;
        if (prev) {
            EigenPair p1 = principal_eigenpair(assemble(g1, cs),
                                               ladder.tol_eig,
                                               ladder.max_iter);
            ext = richardson_pair(g1.radius, p1.lambda, g2.radius, p2.lambda);
        } else {
            ext = raw;
        }
    };

    for (double e : rep.eps) {
        double raw_m, ext_m, raw_p, ext_p;
        solve_pair(-e, raw_m, ext_m);
        solve_pair(+e, raw_p, ext_p);
        rep.raw_minus.push_back(raw_m);
        rep.raw_plus.push_back(raw_p);
        rep.lambda_minus.push_back(ext_m);
        rep.lambda_plus.push_back(ext_p);
        rep.left_slopes.push_back((rep.lambda_star_f - ext_m) / e);
        rep.right_slopes.push_back((ext_p - rep.lambda_star_f) / e);
        rep.raw_left_slopes.push_back((rep.lambda_star_f_raw - raw_m) / e);
        rep.raw_right_slopes.push_back((raw_p - rep.lambda_star_f_raw) / e);
    }

    auto category = [&](double ls, double rs) {
        if (ls > tol_mono)
            return rs > tol_mono ? MonoVerdict::StrictAtF
                                 : MonoVerdict::Inconclusive;
        return rs > tol_mono ? MonoVerdict::StrictOnRightOnly
                             : MonoVerdict::Flat;
    };
    rep.verdict = category(rep.left_slopes[0], rep.right_slopes[0]);
    for (std::size_t i = 1; i < rep.eps.size(); ++i)
        if (category(rep.left_slopes[i], rep.right_slopes[i]) != rep.verdict)
            rep.verdict = MonoVerdict::Inconclusive;
    return rep;
}

GroundState shifted_eigen_surrogate(const CoefficientSet& coeffs,
                                    double lambda, const Grid& grid) {
    DiscreteOperator op = assemble(grid, coeffs);
    // Boundary data 1 on the Dirichlet exterior: the source collects the
    // stencil weights of dropped neighbors, i.e. the row-sum deficit of
    // the f-free generator. This selects the solution branch that grows
    // toward the boundary (relative to the ground state), whose twisted
    // process is the transient one; a compact interior source would pick
    // the decaying branch instead, and its twisted process is pulled
    // back toward the source.
    DiscreteOperator op0 =
        assemble(grid, coeffs.with_f(Expression::parse("0")));
    Eigen::VectorXd source =
        -(op0.A * Eigen::VectorXd::Ones(grid.rows()));
    for (int row = 0; row < grid.rows(); ++row)
        if (source[row] < 0.0) source[row] = 0.0;  // interior roundoff
    Eigen::VectorXd psi = solve_shifted(op.A, lambda, source);
    if (!(psi.minCoeff() > 0.0))
        throw Error(
            "shifted solve produced a sign change; lambda must exceed the "
            "grid principal eigenvalue");

    GroundState gs;
    gs.lambda_star = lambda;
    gs.grid = grid;
    gs.psi_star = std::move(psi);
    gs.converged = true;
    if (grid.origin_row >= 0) gs.psi_star /= gs.psi_star[grid.origin_row];
    gradient_field(gs, coeffs);
    return gs;
}

Classification classify_ground_state(const CoefficientSet& coeffs,
                                     const ClassifyOptions& opts) {
    GroundState gs = lambda_star(coeffs, opts.ladder);

    Classification out;
    out.lambda_star = gs.lambda_star;

    const bool shifted =
        opts.lambda && *opts.lambda > gs.lambda_star + 1e-9;
    GroundState probe_gs =
        shifted ? shifted_eigen_surrogate(coeffs, *opts.lambda, gs.grid)
                : std::move(gs);

    Point x0 = opts.x0 ? *opts.x0
                       : Point{std::min(2.0, 0.6 * probe_gs.grid.radius), 0.0};
    DriftSpec drift = DriftSpec::from_field(probe_gs.twisted_drift_field());
    out.twisted_hitting =
        hitting_stats(drift, coeffs.a, x0, opts.sim, opts.target);

    if (shifted) {
        out.verdict = out.twisted_hitting.no_returns ? GsClass::Transient
                                                     : GsClass::Inconclusive;
        out.conflict = !out.twisted_hitting.no_returns;
        return out;
    }

    out.probe = monotonicity_probe(coeffs, opts.ladder, opts.bump, opts.eps,
                                   opts.tol_mono);
    const bool returns = out.twisted_hitting.n_hits > 0;
    const bool geometric = out.twisted_hitting.geometric;

    switch (out.probe->verdict) {
        case MonoVerdict::StrictAtF:
            if (geometric)
                out.verdict = GsClass::ExponentiallyErgodic;
            else
                out.verdict = GsClass::Inconclusive, out.conflict = true;
            break;
        case MonoVerdict::StrictOnRightOnly:
            if (returns)
                out.verdict = GsClass::RecurrentNotExpErgodic;
            else
                out.verdict = GsClass::Inconclusive, out.conflict = true;
            break;
        case MonoVerdict::Flat:
            if (geometric)
                out.verdict = GsClass::Inconclusive, out.conflict = true;
            else
                out.verdict = GsClass::Transient;
            break;
        case MonoVerdict::Inconclusive:
            out.verdict = GsClass::Inconclusive;
            break;
    }
    return out;
}

GreenProbe green_probe(const CoefficientSet& coeffs, double lambda,
                       const Expression& g, std::vector<double> T_ladder,
                       const SimConfig& sim) {
    if (T_ladder.size() < 2) throw Error("green_probe needs a T ladder");
    std::sort(T_ladder.begin(), T_ladder.end());

    SimConfig cfg = sim;
    cfg.horizon = T_ladder.back();
    cfg.n_checkpoints =
        std::max<int>(40, 4 * static_cast<int>(T_ladder.size()));

    DriftSpec drift = DriftSpec::from_exprs(coeffs.b);
    PathEnsemble ens = simulate(drift, coeffs.a, {0.0, 0.0}, cfg, &coeffs.f);
    FkEstimate fk = feynman_kac(ens, lambda, g, /*throw_on_degenerate=*/false);

    // cumulative integral of m(t) = exp(L(t)) by trapezoid
    const int C = static_cast<int>(fk.times.size());
    std::vector<double> cum(C, 0.0);
    double prev_t = 0.0, prev_m = std::exp(fk.log_mean[0]);
    for (int c = 0; c < C; ++c) {
        double m = std::exp(fk.log_mean[c]);
        cum[c] = (c ? cum[c - 1] : 0.0) +
                 0.5 * (m + prev_m) * (fk.times[c] - prev_t);
        prev_t = fk.times[c];
        prev_m = m;
    }
    auto cum_at = [&](double t) {
        if (t <= fk.times[0]) return cum[0] * t / fk.times[0];
        for (int c = 1; c < C; ++c)
            if (t <= fk.times[c]) {
                double w = (t - fk.times[c - 1]) /
                           (fk.times[c] - fk.times[c - 1]);
                return cum[c - 1] + w * (cum[c] - cum[c - 1]);
            }
        return cum[C - 1];
    };

    GreenProbe out;
    out.T = T_ladder;
    double lo = 0.0, prev_cum = 0.0;
    for (double t : T_ladder) {
        double c = cum_at(t);
        out.window_integrals.push_back(c - prev_cum);
        prev_cum = c;
        (void)lo;
    }
    out.total = prev_cum;
    for (std::size_t k = 1; k < out.window_integrals.size(); ++k) {
        double a = out.window_integrals[k - 1];
        double b = out.window_integrals[k];
        out.ratios.push_back(a > 0.0 ? b / a
                                     : std::numeric_limits<double>::infinity());
    }
    out.divergence_flag = !out.ratios.empty() && out.ratios.back() >= 0.9;
    return out;
}

PinnedMetReport pinned_met_check(const GroundState& gs,
                                 const CoefficientSet& coeffs,
                                 const WeightSpec& g,
                                 const std::vector<Point>& x_list,
                                 const SimConfig& sim) {
    PinnedMetReport rep;
    rep.x_list = x_list;
    GridScalarField psi = gs.psi_field();
    DriftSpec drift = DriftSpec::from_exprs(coeffs.b);

    for (std::size_t i = 0; i < x_list.size(); ++i) {
        SimConfig cfg = sim;
        cfg.stream_offset = sim.stream_offset + i * sim.n_paths;
        PathEnsemble ens =
            simulate(drift, coeffs.a, x_list[i], cfg, &coeffs.f);
        FkEstimate fk = feynman_kac(ens, gs.lambda_star, g,
                                    /*throw_on_degenerate=*/false);
        double denom = psi.at(x_list[i]);
        if (!(denom > 0.0)) throw NotPositive("Psi* vanishes at a pin point");
        rep.ratios.push_back(std::exp(fk.log_mean.back()) / denom);
        rep.std_errs.push_back(fk.std_err.back());
    }
    double mn = *std::min_element(rep.ratios.begin(), rep.ratios.end());
    double mx = *std::max_element(rep.ratios.begin(), rep.ratios.end());
    rep.dispersion =
        mn > 0.0 ? mx / mn - 1.0 : std::numeric_limits<double>::infinity();
    return rep;
}

LyapunovReport lyapunov_check(const CoefficientSet& coeffs,
                              const Expression& V, double ball_radius,
                              LyapunovMode mode, double requested_rate,
                              double grid_radius, int n_per_axis) {
    if (n_per_axis <= 0) {
        double per_unit = coeffs.dim == 2 ? 8.0 : 25.0;
        n_per_axis =
            2 * std::max(2, static_cast<int>(std::ceil(grid_radius *
                                                       per_unit))) + 1;
    }
    LyapunovReport rep;
    rep.grid = build_grid(coeffs.dim, grid_radius, 0.0, n_per_axis);
    const Grid& g = rep.grid;
    rep.neg_lv_over_v.resize(g.rows());
    rep.boundary_min_v = std::numeric_limits<double>::infinity();

    auto eval = [&](double x1, double x2, const Expression& e) {
        Bindings b{x1, {}, {}};
        if (coeffs.dim == 2) b.x2 = x2;
        return e.evaluate(b);
    };

    double best_delta = std::numeric_limits<double>::infinity();
    double kappa0 = -std::numeric_limits<double>::infinity();
    double inner_ell = std::numeric_limits<double>::infinity();
    double outer_ell = std::numeric_limits<double>::infinity();
    bool has_outside = false;

    for (int row = 0; row < g.rows(); ++row) {
        const Point& p = g.nodes[row];
        double v0 = eval(p[0], p[1], V);
        if (!(v0 > 0.0)) throw NotPositive("Lyapunov V must be positive");
        double lv = 0.0;
        for (int ax = 0; ax < coeffs.dim; ++ax) {
            double xp1 = p[0] + (ax == 0 ? g.h : 0.0);
            double xp2 = p[1] + (ax == 1 ? g.h : 0.0);
            double xm1 = p[0] - (ax == 0 ? g.h : 0.0);
            double xm2 = p[1] - (ax == 1 ? g.h : 0.0);
            double vp = eval(xp1, xp2, V);
            double vm = eval(xm1, xm2, V);
            if (!(vp > 0.0) || !(vm > 0.0))
                throw NotPositive("Lyapunov V must be positive");
            double aa = eval(p[0], p[1], coeffs.a[ax]);
            double bb = eval(p[0], p[1], coeffs.b[ax]);
            lv += aa * (vp - 2.0 * v0 + vm) / (g.h * g.h);
            // same hybrid stencil as the assembled operator
            if (aa / (g.h * g.h) - std::abs(bb) / (2.0 * g.h) > 0.0)
                lv += bb * (vp - vm) / (2.0 * g.h);
            else if (bb > 0.0)
                lv += bb * (vp - v0) / g.h;
            else
                lv += bb * (v0 - vm) / g.h;
        }
        double ratio = -lv / v0;
        rep.neg_lv_over_v[row] = ratio;

        double r = std::sqrt(p[0] * p[0] + p[1] * p[1]);
        if (r > ball_radius) {
            has_outside = true;
            best_delta = std::min(best_delta, ratio);
            if (r <= 1.25 * ball_radius)
                inner_ell = std::min(inner_ell, ratio);
            if (r >= 0.9 * grid_radius)
                outer_ell = std::min(outer_ell, ratio);
        } else {
            kappa0 = std::max(kappa0, lv + requested_rate * v0);
        }
        bool on_ring = false;
        for (int ax = 0; ax < coeffs.dim && !on_ring; ++ax)
            for (int dir : {-1, +1})
                if (g.neighbor(row, ax, dir) < 0) {
                    on_ring = true;
                    break;
                }
        if (on_ring) rep.boundary_min_v = std::min(rep.boundary_min_v, v0);
    }
    if (!has_outside) throw BadRadius("ball covers the whole grid");

    rep.best_delta = best_delta;
    rep.kappa0 = std::max(kappa0, 0.0);
    if (mode == LyapunovMode::RateDelta) {
        rep.pass = best_delta >= requested_rate && best_delta > 0.0;
    } else {
        rep.pass = best_delta > 0.0 && outer_ell >= requested_rate &&
                   outer_ell >= inner_ell;
    }
    return rep;
}

}  // namespace eigendrift
