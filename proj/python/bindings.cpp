#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "eigendrift/beta.hpp"
#include "eigendrift/control.hpp"
#include "eigendrift/probe.hpp"

namespace py = pybind11;
using namespace eigendrift;

namespace {

CoefficientSet make_coeffs(int dim, const std::vector<std::string>& a,
                           const std::vector<std::string>& b,
                           const std::string& f,
                           const std::optional<std::string>& c) {
    CoefficientSet cs = CoefficientSet::make(dim, a, b, f);
    if (c) cs.c = Expression::parse(*c);
    return cs;
}

LadderConfig make_ladder(double r0, double growth, int max_rungs,
                         double n_per_unit) {
    LadderConfig lad;
    lad.r0 = r0;
    lad.growth = growth;
    lad.max_rungs = max_rungs;
    lad.n_per_unit_length = n_per_unit;
    return lad;
}

py::dict ground_state_dict(const GroundState& gs) {
    py::dict d;
    d["lambda_star"] = gs.lambda_star;
    d["converged"] = gs.converged;
    d["residual"] = gs.residual;
    if (gs.extrapolated) d["extrapolated"] = *gs.extrapolated;
    py::list ladder;
    for (const auto& r : gs.ladder)
        ladder.append(py::make_tuple(r.r, r.n_per_axis, r.lambda));
    d["ladder"] = ladder;
    std::vector<double> psi(gs.psi_star.data(),
                            gs.psi_star.data() + gs.psi_star.size());
    d["psi"] = psi;
    py::list nodes;
    for (const auto& p : gs.grid.nodes)
        nodes.append(gs.grid.dim == 2 ? py::make_tuple(p[0], p[1])
                                      : py::make_tuple(p[0]));
    d["nodes"] = nodes;
    return d;
}

}  // namespace

PYBIND11_MODULE(_eigendrift, m) {
    m.doc() = "principal eigenvalues of elliptic operators via Dirichlet "
              "exhaustion";
    m.attr("__version__") = "0.1.0";

    m.def(
        "eval_expression",
        [](const std::string& text, double x1, double x2, double u) {
            return Expression::parse(text).evaluate(Bindings{x1, x2, u});
        },
        py::arg("text"), py::arg("x1") = 0.0, py::arg("x2") = 0.0,
        py::arg("u") = 0.0,
        "Parse and evaluate a coefficient expression at (x1, x2, u).");

    m.def(
        "lambda_star",
        [](int dim, std::vector<std::string> a, std::vector<std::string> b,
           std::string f, double r0, double growth, int max_rungs,
           double n_per_unit) {
            GroundState gs =
                lambda_star(make_coeffs(dim, a, b, f, {}),
                            make_ladder(r0, growth, max_rungs, n_per_unit));
            return ground_state_dict(gs);
        },
        py::arg("dim"), py::arg("a"), py::arg("b"), py::arg("f") = "0",
        py::arg("r0") = 2.0, py::arg("growth") = 1.5, py::arg("max_rungs") = 8,
        py::arg("n_per_unit") = 50.0,
        "Generalized principal eigenvalue via Dirichlet exhaustion.");

    m.def(
        "lambda_curve",
        [](int dim, std::vector<std::string> a, std::vector<std::string> b,
           std::string f, std::vector<double> betas, double r0, double growth,
           int max_rungs, double n_per_unit, double slope_tol,
           bool skip_bump_check) {
            CurveConfig cc;
            cc.ladder = make_ladder(r0, growth, max_rungs, n_per_unit);
            cc.slope_tol = slope_tol;
            cc.skip_bump_check = skip_bump_check;
            BetaCurve c =
                lambda_curve(make_coeffs(dim, a, b, f, {}), betas, cc);
            py::dict d;
            d["betas"] = c.betas;
            d["lambdas"] = c.lambdas;
            d["lambdas_extrapolated"] = c.lambdas_extrapolated;
            d["slopes"] = c.slopes;
            d["beta_c_estimate"] = c.beta_c_estimate;
            d["lambda_c"] = c.lambda_c;
            return d;
        },
        py::arg("dim"), py::arg("a"), py::arg("b"), py::arg("f"),
        py::arg("betas"), py::arg("r0") = 2.0, py::arg("growth") = 1.5,
        py::arg("max_rungs") = 8, py::arg("n_per_unit") = 50.0,
        py::arg("slope_tol") = 1e-3, py::arg("skip_bump_check") = false,
        "Eigenvalue curve Lambda_beta = lambda_star(beta f) with beta_c.");

    m.def(
        "classify",
        [](int dim, std::vector<std::string> a, std::vector<std::string> b,
           std::string f, int max_rungs, long n_paths, double horizon,
           std::uint64_t seed) {
            ClassifyOptions opts;
            opts.ladder.max_rungs = max_rungs;
            opts.sim.n_paths = n_paths;
            opts.sim.horizon = horizon;
            opts.sim.seed = seed;
            Classification c =
                classify_ground_state(make_coeffs(dim, a, b, f, {}), opts);
            py::dict d;
            d["verdict"] = to_string(c.verdict);
            d["lambda_star"] = c.lambda_star;
            d["conflict"] = c.conflict;
            d["geometric"] = c.twisted_hitting.geometric;
            d["no_returns"] = c.twisted_hitting.no_returns;
            d["fitted_rate"] = c.twisted_hitting.fitted_rate;
            if (c.probe) d["monotonicity"] = to_string(c.probe->verdict);
            return d;
        },
        py::arg("dim"), py::arg("a"), py::arg("b"), py::arg("f") = "0",
        py::arg("max_rungs") = 6, py::arg("n_paths") = 4000,
        py::arg("horizon") = 10.0, py::arg("seed") = 20240817,
        "Ground-state classification (ergodic / recurrent / transient).");

    m.def(
        "feynman_kac_slope",
        [](int dim, std::vector<std::string> a, std::vector<std::string> b,
           std::string f, std::vector<double> x0, double dt, double horizon,
           long n_paths, std::uint64_t seed, double lambda_shift) {
            CoefficientSet cs = make_coeffs(dim, a, b, f, {});
            SimConfig sim;
            sim.dt = dt;
            sim.horizon = horizon;
            sim.n_paths = n_paths;
            sim.seed = seed;
            Point p{x0.size() > 0 ? x0[0] : 0.0, x0.size() > 1 ? x0[1] : 0.0};
            PathEnsemble ens =
                simulate(DriftSpec::from_exprs(cs.b), cs.a, p, sim, &cs.f);
            FkEstimate fk = feynman_kac(ens, lambda_shift, {}, false);
            py::dict d;
            d["times"] = fk.times;
            d["log_mean"] = fk.log_mean;
            d["std_err"] = fk.std_err;
            d["slope"] = fk.slope;
            d["slope_stderr"] = fk.slope_stderr;
            d["degenerate"] = fk.degenerate;
            return d;
        },
        py::arg("dim"), py::arg("a"), py::arg("b"), py::arg("f"),
        py::arg("x0") = std::vector<double>{}, py::arg("dt") = 1e-3,
        py::arg("horizon") = 10.0, py::arg("n_paths") = 2000,
        py::arg("seed") = 1, py::arg("lambda_shift") = 0.0,
        "Monte Carlo risk-sensitive average E_x(f) slope estimate.");

    m.def(
        "solve_hjb",
        [](int dim, std::vector<std::string> a, std::vector<std::string> b,
           std::string c, std::vector<double> actions, double grid_radius,
           int n_per_axis) {
            ControlProblem pb;
            pb.coeffs = make_coeffs(dim, a, b, "0", c);
            pb.actions = actions;
            pb.grid = build_grid(dim, grid_radius, 0.0, n_per_axis);
            HJBSolution sol = solve_hjb(pb);
            py::dict d;
            d["lambda_star"] = sol.lambda_star;
            d["converged"] = sol.converged;
            d["monotone"] = sol.monotone;
            d["policy"] = sol.policy;
            std::vector<double> V(sol.V.data(), sol.V.data() + sol.V.size());
            d["V"] = V;
            py::list trace;
            for (const auto& t : sol.trace)
                trace.append(
                    py::make_tuple(t.iteration, t.lambda, t.n_changed));
            d["trace"] = trace;
            return d;
        },
        py::arg("dim"), py::arg("a"), py::arg("b"), py::arg("c"),
        py::arg("actions"), py::arg("grid_radius") = 4.0,
        py::arg("n_per_axis") = 41,
        "Risk-sensitive HJB over a finite action set by policy iteration.");

    m.def(
        "ergodic_identity",
        [](int dim, std::vector<std::string> a, std::vector<std::string> b,
           std::string f, double beta, int max_rungs) {
            LadderConfig lad;
            lad.max_rungs = max_rungs;
            ErgodicIdentity idn = ergodic_identity_check(
                make_coeffs(dim, a, b, f, {}), beta, lad);
            py::dict d;
            d["lhs"] = idn.lhs;
            d["rhs"] = idn.rhs;
            d["residual"] = idn.residual;
            d["hypothesis_violated"] =
                idn.hypothesis_violated ? py::cast(*idn.hypothesis_violated)
                                        : py::none();
            return d;
        },
        py::arg("dim"), py::arg("a"), py::arg("b"), py::arg("f"),
        py::arg("beta") = 1.0, py::arg("max_rungs") = 6,
        "Ergodic value identity residual for Lambda_beta.");
}
