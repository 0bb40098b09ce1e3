#include "run.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "eigendrift/beta.hpp"
#include "eigendrift/control.hpp"
#include "eigendrift/probe.hpp"
#include "svg.hpp"

namespace eigendrift::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Expression parse_expr(const std::string& key, const std::string& text) {
    try {
        return Expression::parse(text);
    } catch (const Error& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

const json& require(const json& j, const std::string& key,
                    const std::string& where) {
    auto it = j.find(key);
    if (it == j.end())
        throw ConfigError("missing config key '" + where + key + "'");
    return *it;
}

CoefficientSet parse_problem(const json& cfg) {
    const json& p = require(cfg, "problem", "");
    CoefficientSet cs;
    cs.dim = require(p, "dim", "problem.").get<int>();
    if (cs.dim != 1 && cs.dim != 2)
        throw ConfigError("problem.dim must be 1 or 2");
    const json& a = require(p, "a", "problem.");
    const json& b = require(p, "b", "problem.");
    if (!a.is_array() || static_cast<int>(a.size()) != cs.dim)
        throw ConfigError("problem.a must list one expression per axis");
    if (!b.is_array() || static_cast<int>(b.size()) != cs.dim)
        throw ConfigError("problem.b must list one expression per axis");
    for (int i = 0; i < cs.dim; ++i) {
        cs.a.push_back(parse_expr("problem.a", a[i].get<std::string>()));
        cs.b.push_back(parse_expr("problem.b", b[i].get<std::string>()));
    }
    cs.f = parse_expr("problem.f",
                      p.value("f", std::string("0")));
    if (p.contains("c"))
        cs.c = parse_expr("problem.c", p["c"].get<std::string>());
    cs.f_lower_bound = p.value("f_lower_bound", -1e12);
    cs.ellipticity_floor = p.value("ellipticity_floor", 1e-10);
    return cs;
}

LadderConfig parse_ladder(const json& cfg) {
    LadderConfig lad;
    if (!cfg.contains("numerics")) return lad;
    const json& n = cfg["numerics"];
    if (!n.contains("ladder")) return lad;
    const json& l = n["ladder"];
    lad.r0 = l.value("r0", lad.r0);
    lad.growth = l.value("growth", lad.growth);
    lad.max_rungs = l.value("max_rungs", lad.max_rungs);
    lad.n_per_unit_length = l.value("n_per_unit", lad.n_per_unit_length);
    lad.tol_eig = l.value("tol", lad.tol_eig);
    return lad;
}

SimConfig parse_sim(const json& cfg, std::optional<std::uint64_t> seed_flag,
                    bool require_seed) {
    SimConfig sim;
    const json* s = nullptr;
    if (cfg.contains("numerics") && cfg["numerics"].contains("sim"))
        s = &cfg["numerics"]["sim"];
    if (s) {
        sim.dt = s->value("dt", sim.dt);
        sim.horizon = s->value("horizon", sim.horizon);
        sim.n_paths = s->value("n_paths", sim.n_paths);
        sim.box_radius = s->value("box_radius", sim.box_radius);
        sim.record_stride = s->value("record_stride", sim.record_stride);
        sim.n_checkpoints = s->value("n_checkpoints", sim.n_checkpoints);
    }
    bool have_seed = false;
    if (cfg.contains("numerics") && cfg["numerics"].contains("seed")) {
        sim.seed = cfg["numerics"]["seed"].get<std::uint64_t>();
        have_seed = true;
    }
    if (seed_flag) {
        sim.seed = *seed_flag;
        have_seed = true;
    }
    if (require_seed && !have_seed)
        throw ConfigError(
            "stochastic task needs numerics.seed (or --seed)");
    return sim;
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream os(path, std::ios::binary);
    os << header << "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i)
            os << (i ? "," : "") << num(r[i]);
        os << "\n";
    }
}

json ladder_json(const std::vector<LadderRung>& ladder) {
    json out = json::array();
    for (const auto& r : ladder)
        out.push_back({{"r", r.r}, {"n_per_axis", r.n_per_axis},
                       {"lambda", r.lambda}});
    return out;
}

// ---- tasks ----

json task_eigen(const json& cfg, const fs::path& out) {
    CoefficientSet cs = parse_problem(cfg);
    LadderConfig lad = parse_ladder(cfg);
    GroundState gs = lambda_star(cs, lad);

    std::vector<std::vector<double>> rows;
    Series s;
    for (const auto& r : gs.ladder) {
        rows.push_back({r.r, static_cast<double>(r.n_per_axis), r.lambda});
        s.x.push_back(r.r);
        s.y.push_back(r.lambda);
    }
    write_csv(out / "ladder.csv", "r,n_per_axis,lambda", rows);

    rows.clear();
    for (int i = 0; i < gs.grid.rows(); ++i) {
        std::vector<double> row{gs.grid.nodes[i][0]};
        if (gs.grid.dim == 2) row.push_back(gs.grid.nodes[i][1]);
        row.push_back(gs.psi_star[i]);
        rows.push_back(std::move(row));
    }
    write_csv(out / "psi.csv",
              gs.grid.dim == 2 ? "x1,x2,psi" : "x1,psi", rows);

    s.label = "lambda_hat(r)";
    write_line_plot((out / "eigen.svg").string(), {s},
                    {"Dirichlet exhaustion ladder", "r", "lambda_hat", {}});

    json res;
    res["lambda_star"] = gs.lambda_star;
    res["converged"] = gs.converged;
    res["residual"] = gs.residual;
    if (gs.extrapolated) res["extrapolated"] = *gs.extrapolated;
    res["ladder"] = ladder_json(gs.ladder);
    return res;
}

json task_curve(const json& cfg, const fs::path& out) {
    CoefficientSet cs = parse_problem(cfg);
    const json& t = require(cfg, "task", "");
    std::vector<double> betas;
    const json& bj = require(t, "betas", "task.");
    if (bj.is_array()) {
        for (const auto& v : bj) betas.push_back(v.get<double>());
    } else {
        double from = require(bj, "from", "task.betas.").get<double>();
        double to = require(bj, "to", "task.betas.").get<double>();
        int count = require(bj, "count", "task.betas.").get<int>();
        for (int i = 0; i < count; ++i)
            betas.push_back(count == 1 ? from
                                       : from + (to - from) * i / (count - 1));
    }
    CurveConfig cc;
    cc.ladder = parse_ladder(cfg);
    cc.slope_tol = t.value("slope_tol", cc.slope_tol);
    cc.skip_bump_check = t.value("skip_bump_check", false);
    BetaCurve curve = lambda_curve(cs, betas, cc);

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < betas.size(); ++i)
        rows.push_back({betas[i], curve.lambdas[i],
                        static_cast<double>(curve.converged[i]),
                        curve.slopes[i]});
    write_csv(out / "curve.csv", "beta,lambda,converged,slope", rows);

    Series s{betas, curve.lambdas_extrapolated, "Lambda_beta", "#1f77b4",
             true};
    PlotOptions po{"Eigenvalue curve", "beta", "Lambda_beta", {}};
    if (std::isfinite(curve.beta_c_estimate))
        po.vlines.push_back(curve.beta_c_estimate);
    write_line_plot((out / "curve.svg").string(), {s}, po);

    json res;
    res["betas"] = betas;
    res["lambdas"] = curve.lambdas;
    res["lambdas_extrapolated"] = curve.lambdas_extrapolated;
    res["slopes"] = curve.slopes;
    res["beta_c_estimate"] = std::isfinite(curve.beta_c_estimate)
                                 ? json(curve.beta_c_estimate)
                                 : json("-inf");
    res["lambda_c"] = curve.lambda_c;
    return res;
}

json fk_json(const FkEstimate& fk) {
    return {{"times", fk.times},        {"log_mean", fk.log_mean},
            {"std_err", fk.std_err},    {"ess", fk.ess},
            {"slope", fk.slope},        {"slope_stderr", fk.slope_stderr},
            {"degenerate", fk.degenerate}};
}

json task_simulate(const json& cfg, const fs::path& out, SimConfig sim) {
    CoefficientSet cs = parse_problem(cfg);
    const json& t = require(cfg, "task", "");
    std::string which = t.value("drift", std::string("base"));
    Point x0{0.0, 0.0};
    if (t.contains("x0"))
        for (std::size_t i = 0; i < t["x0"].size() && i < 2; ++i)
            x0[i] = t["x0"][i].get<double>();
    if (sim.record_stride == 0) sim.record_stride = 100;

    DriftSpec drift = DriftSpec::from_exprs(cs.b);
    double lambda_shift = t.value("lambda_shift", 0.0);
    json res;
    if (which == "twisted") {
        GroundState gs = lambda_star(cs, parse_ladder(cfg));
        drift = DriftSpec::from_field(gs.twisted_drift_field());
        res["lambda_star"] = gs.lambda_star;
        if (t.value("lambda_shift_auto", false)) lambda_shift = gs.lambda_star;
    } else if (which != "base") {
        throw ConfigError("task.drift must be 'base' or 'twisted'");
    }

    PathEnsemble ens = simulate(drift, cs.a, x0, sim, &cs.f);

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < ens.recorded_t.size(); ++i) {
        std::vector<double> row{ens.recorded_t[i],
                                static_cast<double>(ens.recorded_path[i]),
                                ens.recorded_x1[i]};
        if (cs.dim == 2) row.push_back(ens.recorded_x2[i]);
        row.push_back(ens.recorded_s[i]);
        rows.push_back(std::move(row));
    }
    write_csv(out / "ensemble.csv",
              cs.dim == 2 ? "t,path_id,x1,x2,S" : "t,path_id,x1,S", rows);

    res["n_paths"] = ens.cfg.n_paths;
    res["n_alive"] = ens.n_alive();
    res["excursion_fraction"] = ens.excursion_fraction;
    MeanEstimate avg = ergodic_average(ens);
    res["ergodic_average"] = {{"value", avg.value}, {"std_err", avg.std_err}};
    if (t.value("feynman_kac", true)) {
        FkEstimate fk = feynman_kac(ens, lambda_shift, {}, false);
        res["feynman_kac"] = fk_json(fk);
        res["lambda_shift"] = lambda_shift;
        Series s{fk.times, fk.log_mean, "log E[exp(S - shift t)]", "#1f77b4",
                 true};
        write_line_plot((out / "feynman_kac.svg").string(), {s},
                        {"Feynman-Kac functional", "t", "log mean", {}});
    }

    std::vector<double> finals;
    for (long p = 0; p < ens.cfg.n_paths; ++p)
        if (!ens.dropped[p]) finals.push_back(ens.states.back()[p][0]);
    write_histogram((out / "final_states.svg").string(), finals, 40,
                    {"Final states (x1)", "x1", "count", {}});
    return res;
}

json hitting_json(const HittingStats& h) {
    return {{"times", h.times},
            {"survival", h.survival},
            {"fitted_rate", h.fitted_rate},
            {"r_squared", h.r_squared},
            {"geometric", h.geometric},
            {"delta", h.delta},
            {"e_delta_tau", std::isfinite(h.e_delta_tau)
                                ? json(h.e_delta_tau)
                                : json(nullptr)},
            {"n_hits", h.n_hits},
            {"n_paths", h.n_paths},
            {"no_returns", h.no_returns}};
}

json task_classify(const json& cfg, const fs::path& out, SimConfig sim) {
    CoefficientSet cs = parse_problem(cfg);
    const json& t = require(cfg, "task", "");
    ClassifyOptions opts;
    opts.ladder = parse_ladder(cfg);
    sim.horizon = sim.horizon == 1.0 ? 10.0 : sim.horizon;
    if (sim.n_paths == 1) sim.n_paths = 4000;
    if (sim.n_checkpoints == 10) sim.n_checkpoints = 40;
    opts.sim = sim;
    if (t.contains("lambda")) opts.lambda = t["lambda"].get<double>();
    opts.target.radius = t.value("target_radius", 1.0);
    if (t.contains("x0")) {
        Point p{0.0, 0.0};
        for (std::size_t i = 0; i < t["x0"].size() && i < 2; ++i)
            p[i] = t["x0"][i].get<double>();
        opts.x0 = p;
    }

    Classification c = classify_ground_state(cs, opts);

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < c.twisted_hitting.times.size(); ++i)
        rows.push_back(
            {c.twisted_hitting.times[i], c.twisted_hitting.survival[i]});
    write_csv(out / "survival.csv", "t,survival", rows);
    Series s{c.twisted_hitting.times, c.twisted_hitting.survival,
             "P(tau > t)", "#1f77b4", true};
    write_line_plot((out / "survival.svg").string(), {s},
                    {"Return-time survival (twisted process)", "t",
                     "survival", {}});

    json res;
    res["verdict"] = to_string(c.verdict);
    res["lambda_star"] = c.lambda_star;
    res["conflict"] = c.conflict;
    res["hitting"] = hitting_json(c.twisted_hitting);
    if (c.probe) {
        res["monotonicity"] = {
            {"verdict", to_string(c.probe->verdict)},
            {"eps", c.probe->eps},
            {"left_slopes", c.probe->left_slopes},
            {"right_slopes", c.probe->right_slopes},
        };
    }
    return res;
}

json task_hjb(const json& cfg, const fs::path& out) {
    const json& t = require(cfg, "task", "");
    ControlProblem pb;
    pb.coeffs = parse_problem(cfg);
    if (!pb.coeffs.c)
        throw ConfigError("hjb task needs problem.c (running cost)");
    const json& acts = require(cfg["problem"], "actions", "problem.");
    for (const auto& v : acts) pb.actions.push_back(v.get<double>());
    double radius = require(t, "grid_radius", "task.").get<double>();
    int n = require(t, "n_per_axis", "task.").get<int>();
    pb.grid = build_grid(pb.coeffs.dim, radius, 0.0, n);

    HJBSolution sol = solve_hjb(pb);

    std::vector<std::vector<double>> rows;
    for (int i = 0; i < pb.grid.rows(); ++i) {
        std::vector<double> row{pb.grid.nodes[i][0]};
        if (pb.grid.dim == 2) row.push_back(pb.grid.nodes[i][1]);
        row.push_back(pb.actions[sol.policy[i]]);
        row.push_back(sol.V[i]);
        rows.push_back(std::move(row));
    }
    write_csv(out / "policy.csv",
              pb.grid.dim == 2 ? "x1,x2,action,V" : "x1,action,V", rows);

    rows.clear();
    Series s;
    for (const auto& step : sol.trace) {
        rows.push_back({static_cast<double>(step.iteration), step.lambda,
                        static_cast<double>(step.n_changed)});
        s.x.push_back(step.iteration);
        s.y.push_back(step.lambda);
    }
    write_csv(out / "trace.csv", "iteration,lambda,n_changed", rows);
    s.label = "lambda per iterate";
    write_line_plot((out / "trace.svg").string(), {s},
                    {"Policy iteration trace", "iteration", "lambda", {}});

    json res;
    res["lambda_star"] = sol.lambda_star;
    res["converged"] = sol.converged;
    res["monotone"] = sol.monotone;
    res["iterations"] = sol.trace.size();
    return res;
}

json task_identities(const json& cfg, const fs::path& out) {
    CoefficientSet cs = parse_problem(cfg);
    const json& t = require(cfg, "task", "");
    double beta = t.value("beta", 1.0);
    double d_beta = t.value("d_beta", 0.05);
    LadderConfig lad = parse_ladder(cfg);

    json res;
    ErgodicIdentity idn = ergodic_identity_check(cs, beta, lad);
    res["ergodic_identity"] = {
        {"lhs", idn.lhs},
        {"rhs", idn.rhs},
        {"residual", idn.residual},
        {"hypothesis_violated",
         idn.hypothesis_violated ? json(*idn.hypothesis_violated)
                                 : json(nullptr)}};

    DerivativeCheck dc = derivative_check(cs, beta, d_beta, lad);
    res["derivative"] = {{"fd_slope", dc.fd_slope},
                         {"mu_f", dc.mu_f},
                         {"residual", dc.residual},
                         {"sandwich_lower", dc.sandwich_lower},
                         {"left_increment", dc.left_increment},
                         {"sandwich_ok", dc.sandwich_ok}};

    json duals = json::array();
    std::vector<std::vector<double>> rows{
        {0.0, idn.lhs, idn.rhs, idn.residual},
        {1.0, dc.fd_slope, dc.mu_f, dc.residual}};
    if (t.contains("controls")) {
        for (const auto& ctrl : t["controls"]) {
            std::vector<Expression> v;
            for (const auto& e : ctrl)
                v.push_back(parse_expr("task.controls", e.get<std::string>()));
            DualityResidual du = duality_residual(cs, beta, v, lad);
            duals.push_back({{"cost", du.cost},
                             {"excess", du.excess},
                             {"identity_rhs", du.identity_rhs},
                             {"residual", du.residual},
                             {"lambda_beta", du.lambda_beta}});
            rows.push_back({2.0, du.cost, du.identity_rhs, du.residual});
        }
    }
    res["duality"] = duals;
    write_csv(out / "identities.csv", "kind,lhs,rhs,residual", rows);
    return res;
}

int dispatch(const std::string& task, const std::string& config_path,
             std::string out_dir, std::optional<std::uint64_t> seed_flag,
             bool quiet, int threads) {
    auto t_start = std::chrono::steady_clock::now();
    json cfg;
    try {
        std::ifstream is(config_path);
        if (!is) throw ConfigError("cannot open config '" + config_path + "'");
        cfg = json::parse(is);
    } catch (const json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }

    json report;
    fs::path out;
    try {
        if (cfg.value("schema", 0) != 1)
            throw ConfigError("config must declare \"schema\": 1");
        if (cfg.contains("task") && cfg["task"].contains("type") &&
            cfg["task"]["type"].get<std::string>() != task)
            throw ConfigError("config task.type does not match the '" + task +
                              "' command");
        if (out_dir.empty())
            out_dir = cfg.contains("output")
                          ? cfg["output"].value("dir", std::string("out"))
                          : std::string("out");
        out = out_dir;
        fs::create_directories(out);

        report["schema"] = 1;
        report["version"] = "0.1.0";
        report["command"] = task;
        report["config"] = cfg;
        char hash[24];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(fnv1a(cfg.dump())));
        report["config_hash"] = hash;
        report["threads"] = threads;
        report["warnings"] = json::array();

        const bool stochastic = task == "simulate" || task == "classify";
        if (task == "eigen")
            report["results"] = task_eigen(cfg, out);
        else if (task == "curve")
            report["results"] = task_curve(cfg, out);
        else if (task == "simulate")
            report["results"] =
                task_simulate(cfg, out, parse_sim(cfg, seed_flag, true));
        else if (task == "classify")
            report["results"] =
                task_classify(cfg, out, parse_sim(cfg, seed_flag, true));
        else if (task == "hjb")
            report["results"] = task_hjb(cfg, out);
        else if (task == "identities")
            report["results"] = task_identities(cfg, out);
        (void)stochastic;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        report["error"] = e.what();
        auto dt = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t_start)
                      .count();
        report["wall_clock_seconds"] = dt;
        if (!out.empty()) {
            std::ofstream os(out / "report.json", std::ios::binary);
            os << report.dump(2) << "\n";
        }
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    }

    auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t_start)
                  .count();
    report["wall_clock_seconds"] = dt;
    {
        std::ofstream os(out / "report.json", std::ios::binary);
        os << report.dump(2) << "\n";
    }
    if (!quiet)
        std::printf("%s: report written to %s (%.2f s)\n", task.c_str(),
                    (out / "report.json").string().c_str(), dt);
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{
        "eigendrift: principal eigenvalues of elliptic operators via "
        "Dirichlet exhaustion, twisted diffusions, and risk-sensitive "
        "control"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    int threads = 0;
    if (const char* env = std::getenv("EIGENDRIFT_THREADS"))
        threads = std::atoi(env);
    if (threads <= 0)
        threads = static_cast<int>(std::thread::hardware_concurrency());

    std::string chosen;
    for (const char* name :
         {"eigen", "curve", "simulate", "classify", "hjb", "identities"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "run config (JSON)")
            ->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "override numerics.seed");
        sub->add_option("--threads", threads, "worker thread cap");
        sub->add_flag("--quiet", quiet, "suppress progress output");
        sub->callback([&chosen, name] { chosen = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return dispatch(chosen, config_path, out_dir, seed, quiet, threads);
}

}  // namespace eigendrift::cli
