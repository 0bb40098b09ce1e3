#include "eigendrift/sde.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "eigendrift/rng.hpp"

namespace eigendrift {

namespace {

struct KahanSum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    double value() const { return s; }
};

// Drift + diffusion evaluation over one block of <= kBatch paths.
struct BlockStepper {
    int dim;
    std::vector<BatchEval> drift_be;  // per axis; empty when field is set
    const GridVectorField* field = nullptr;
    std::array<double, 2> sigma_const{0.0, 0.0};
    std::array<bool, 2> sigma_is_const{true, true};
    std::vector<BatchEval> a_be;  // per axis when a depends on x

    BlockStepper(const DriftSpec& drift, const std::vector<Expression>& a,
                 int dim_)
        : dim(dim_) {
        if (drift.field) {
            field = &*drift.field;
        } else {
            for (int ax = 0; ax < dim; ++ax)
                drift_be.emplace_back(drift.exprs[ax]);
        }
        for (int ax = 0; ax < dim; ++ax) {
            if (a[ax].has_free_vars()) {
                sigma_is_const[ax] = false;
                a_be.emplace_back(a[ax]);
            } else {
                double av = a[ax].evaluate({});
                if (!(av > 0.0))
                    throw NotPositive("diffusion coefficient must be positive");
                sigma_const[ax] = std::sqrt(2.0 * av);
                a_be.emplace_back(a[ax]);  // keep axis indices aligned
            }
        }
    }

    void eval(int n, const double* x1, const double* x2,
              double bv[2][kBatch], double sig[2][kBatch]) const {
        if (field) {
            for (int i = 0; i < n; ++i) {
                Point d = field->at({x1[i], dim == 2 ? x2[i] : 0.0});
                bv[0][i] = d[0];
                if (dim == 2) bv[1][i] = d[1];
            }
        } else {
            for (int ax = 0; ax < dim; ++ax)
                drift_be[ax](n, x1, x2, nullptr, bv[ax]);
        }
        for (int ax = 0; ax < dim; ++ax) {
            if (sigma_is_const[ax]) {
                for (int i = 0; i < n; ++i) sig[ax][i] = sigma_const[ax];
            } else {
                a_be[ax](n, x1, x2, nullptr, sig[ax]);
                for (int i = 0; i < n; ++i)
                    sig[ax][i] = std::sqrt(2.0 * sig[ax][i]);
            }
        }
    }
};

int infer_dim(const DriftSpec& drift) {
    if (drift.field) return drift.field->grid.dim;
    int d = static_cast<int>(drift.exprs.size());
    if (d < 1 || d > 2) throw Error("drift must have 1 or 2 components");
    return d;
}

void validate(const SimConfig& cfg, const std::vector<Expression>& a,
              int dim) {
    if (!(cfg.dt > 0.0)) throw Error("dt must be positive");
    if (!(cfg.horizon > 0.0)) throw Error("horizon must be positive");
    if (cfg.n_paths < 1) throw Error("n_paths must be at least 1");
    if (cfg.n_checkpoints < 1) throw Error("need at least one checkpoint");
    if (static_cast<int>(a.size()) < dim)
        throw Error("need one diffusion coefficient per axis");
}

}  // namespace

long PathEnsemble::n_alive() const {
    long n = 0;
    for (char d : dropped) n += d ? 0 : 1;
    return n;
}

PathEnsemble simulate(const DriftSpec& drift, const std::vector<Expression>& a,
                      Point x0, const SimConfig& cfg,
                      const Expression* integrand) {
    const int dim = infer_dim(drift);
    validate(cfg, a, dim);

    PathEnsemble ens;
    ens.dim = dim;
    ens.cfg = cfg;
    // a grid-field drift is only trusted inside its own ball
    if (drift.field)
        ens.cfg.box_radius =
            std::min(cfg.box_radius, drift.field->grid.radius);
    const double box2 = ens.cfg.box_radius * ens.cfg.box_radius;

    const long steps =
        std::max<long>(1, std::llround(cfg.horizon / cfg.dt));
    const int C = std::min<long>(cfg.n_checkpoints, steps);
    std::vector<long> cp_steps(C);
    for (int c = 0; c < C; ++c)
        cp_steps[c] = std::llround(static_cast<double>(steps) * (c + 1) / C);
    ens.checkpoint_times.resize(C);
    for (int c = 0; c < C; ++c) ens.checkpoint_times[c] = cp_steps[c] * cfg.dt;
    ens.states.assign(C, std::vector<Point>(cfg.n_paths, {0.0, 0.0}));
    ens.integrals.assign(C, std::vector<double>(cfg.n_paths, 0.0));
    ens.dropped.assign(cfg.n_paths, 0);

    BlockStepper stepper(drift, a, dim);
    std::optional<BatchEval> f_be;
    if (integrand) f_be.emplace(*integrand);

    const double sqdt = std::sqrt(cfg.dt);
    long excursion_steps = 0, total_steps = 0;

    for (long block = 0; block < cfg.n_paths; block += kBatch) {
        const int n =
            static_cast<int>(std::min<long>(kBatch, cfg.n_paths - block));
        double X[2][kBatch], S[kBatch];
        double bv[2][kBatch], sig[2][kBatch], fv[kBatch];
        bool alive[kBatch];
        std::vector<PathRng> rng;
        rng.reserve(n);
        for (int i = 0; i < n; ++i) {
            X[0][i] = x0[0];
            X[1][i] = dim == 2 ? x0[1] : 0.0;
            S[i] = 0.0;
            alive[i] = true;
            rng.emplace_back(cfg.seed, cfg.stream_offset + block + i);
        }

        int next_cp = 0;
        for (long step = 0; step < steps; ++step) {
            if (f_be) {
                (*f_be)(n, X[0], X[1], nullptr, fv);
                for (int i = 0; i < n; ++i)
                    if (alive[i]) S[i] += fv[i] * cfg.dt;
            }
            if (cfg.record_stride > 0 && step % cfg.record_stride == 0) {
                const float t = static_cast<float>(step * cfg.dt);
                for (int i = 0; i < n; ++i) {
                    if (!alive[i]) continue;
                    ens.recorded_t.push_back(t);
                    ens.recorded_x1.push_back(static_cast<float>(X[0][i]));
                    ens.recorded_x2.push_back(
                        dim == 2 ? static_cast<float>(X[1][i]) : 0.0f);
                    ens.recorded_s.push_back(static_cast<float>(S[i]));
                    ens.recorded_path.push_back(
                        static_cast<std::int32_t>(block + i));
                }
            }

            stepper.eval(n, X[0], X[1], bv, sig);
            for (int i = 0; i < n; ++i) {
                if (!alive[i]) continue;
                for (int ax = 0; ax < dim; ++ax)
                    X[ax][i] += bv[ax][i] * cfg.dt +
                                sig[ax][i] * sqdt * rng[i].normal();
                ++total_steps;
                double r2 = X[0][i] * X[0][i];
                if (dim == 2) r2 += X[1][i] * X[1][i];
                if (r2 > box2) ++excursion_steps;
                if (!std::isfinite(X[0][i]) ||
                    (dim == 2 && !std::isfinite(X[1][i])) ||
                    !std::isfinite(S[i])) {
                    if (cfg.abort_on_nonfinite)
                        throw NonFiniteState(block + i, step);
                    alive[i] = false;
                    ens.dropped[block + i] = 1;
                }
            }

            while (next_cp < C && step + 1 == cp_steps[next_cp]) {
                for (int i = 0; i < n; ++i) {
                    ens.states[next_cp][block + i] = {
                        X[0][i], dim == 2 ? X[1][i] : 0.0};
                    ens.integrals[next_cp][block + i] = S[i];
                }
                ++next_cp;
            }
        }
    }

    ens.excursion_fraction =
        total_steps > 0
            ? static_cast<double>(excursion_steps) / total_steps
            : 0.0;
    return ens;
}

namespace {

double weight_at(const WeightSpec& g, const Point& p, int dim) {
    if (std::holds_alternative<std::monostate>(g)) return 1.0;
    if (const auto* e = std::get_if<Expression>(&g)) {
        Bindings b{p[0], {}, {}};
        if (dim == 2) b.x2 = p[1];
        return e->evaluate(b);
    }
    return std::get<GridScalarField>(g).at(p);
}

struct Fit {
    double slope = 0.0, intercept = 0.0;
    double r_squared = 0.0;
    double slope_stderr = 0.0;
};

Fit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    Fit fit;
    const int n = static_cast<int>(x.size());
    if (n < 2) return fit;
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) mx += x[i], my += y[i];
    mx /= n, my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    if (n > 2) {
        double ss_res = syy - fit.slope * sxy;
        fit.slope_stderr = std::sqrt(std::max(0.0, ss_res / (n - 2)) / sxx);
    }
    return fit;
}

// log-mean-exp with weights over a subset of paths; streaming two-pass
struct LseStats {
    double log_mean = std::numeric_limits<double>::quiet_NaN();
    double std_err = 0.0;
    double ess = 0.0;
};

LseStats log_mean_exp(const std::vector<double>& log_terms,
                      const std::vector<double>& weights) {
    LseStats out;
    const int n = static_cast<int>(log_terms.size());
    if (n == 0) return out;
    double m = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        if (weights[i] > 0.0) m = std::max(m, log_terms[i]);
    if (!std::isfinite(m)) {  // all weights vanished
        out.log_mean = -std::numeric_limits<double>::infinity();
        return out;
    }
    KahanSum sw, sw2;
    for (int i = 0; i < n; ++i) {
        double w = weights[i] > 0.0
                       ? weights[i] * std::exp(log_terms[i] - m)
                       : 0.0;
        sw.add(w);
        sw2.add(w * w);
    }
    double mean = sw.value() / n;
    out.log_mean = m + std::log(mean);
    if (n > 1 && mean > 0.0) {
        double var = std::max(0.0, (sw2.value() - sw.value() * sw.value() / n) /
                                       (n - 1));
        // delta method for log of the sample mean
        out.std_err = std::sqrt(var / n) / mean;
    }
    out.ess = sw2.value() > 0.0 ? sw.value() * sw.value() / sw2.value() : 0.0;
    return out;
}

}  // namespace

FkEstimate feynman_kac(const PathEnsemble& ens, double lambda_shift,
                       const WeightSpec& g, bool throw_on_degenerate) {
    FkEstimate est;
    const int C = static_cast<int>(ens.checkpoint_times.size());
    const long n_paths = static_cast<long>(ens.dropped.size());
    est.times = ens.checkpoint_times;
    est.log_mean.resize(C);
    est.std_err.resize(C);
    est.ess.resize(C);

    std::vector<long> alive;
    for (long i = 0; i < n_paths; ++i)
        if (!ens.dropped[i]) alive.push_back(i);
    if (alive.empty()) throw DegenerateWeights(0.0);

    double min_ess = std::numeric_limits<double>::infinity();
    std::vector<double> log_terms(alive.size()), weights(alive.size());
    for (int c = 0; c < C; ++c) {
        const double t = ens.checkpoint_times[c];
        for (std::size_t k = 0; k < alive.size(); ++k) {
            long i = alive[k];
            log_terms[k] = ens.integrals[c][i] - lambda_shift * t;
            double w = weight_at(g, ens.states[c][i], ens.dim);
            if (w < 0.0)
                throw NotPositive("Feynman-Kac weight g must be nonnegative");
            weights[k] = w;
        }
        LseStats s = log_mean_exp(log_terms, weights);
        est.log_mean[c] = s.log_mean;
        est.std_err[c] = s.std_err;
        est.ess[c] = s.ess;
        min_ess = std::min(min_ess, s.ess);
    }
    if (min_ess < 10.0) {
        est.degenerate = true;
        if (throw_on_degenerate) throw DegenerateWeights(min_ess);
    }

    // slope over the last half of checkpoints
    const int first = C / 2;
    std::vector<double> tx, ty;
    for (int c = first; c < C; ++c) {
        if (!std::isfinite(est.log_mean[c])) continue;
        tx.push_back(est.times[c]);
        ty.push_back(est.log_mean[c]);
    }
    Fit fit = least_squares(tx, ty);
    est.slope = fit.slope;

    // batch-means stderr: split paths into groups, refit per group
    const int n_alive = static_cast<int>(alive.size());
    int n_groups = n_alive >= 160 ? 16 : std::max(2, n_alive / 10);
    if (n_alive >= 2 * n_groups && tx.size() >= 2) {
        std::vector<double> slopes;
        for (int gix = 0; gix < n_groups; ++gix) {
            long lo = static_cast<long>(gix) * n_alive / n_groups;
            long hi = static_cast<long>(gix + 1) * n_alive / n_groups;
            std::vector<double> gx, gy, lt(hi - lo), wt(hi - lo);
            for (int c = first; c < C; ++c) {
                const double t = ens.checkpoint_times[c];
                for (long k = lo; k < hi; ++k) {
                    long i = alive[k];
                    lt[k - lo] = ens.integrals[c][i] - lambda_shift * t;
                    wt[k - lo] = weight_at(g, ens.states[c][i], ens.dim);
                }
                LseStats s = log_mean_exp(lt, wt);
                if (!std::isfinite(s.log_mean)) continue;
                gx.push_back(t);
                gy.push_back(s.log_mean);
            }
            if (gx.size() >= 2) slopes.push_back(least_squares(gx, gy).slope);
        }
        if (slopes.size() >= 2) {
            double m = 0;
            for (double s : slopes) m += s;
            m /= slopes.size();
            double v = 0;
            for (double s : slopes) v += (s - m) * (s - m);
            v /= (slopes.size() - 1);
            est.slope_stderr = std::sqrt(v / slopes.size());
        }
    } else {
        est.slope_stderr = fit.slope_stderr;
    }
    return est;
}

MeanEstimate ergodic_average(const PathEnsemble& ens) {
    const int C = static_cast<int>(ens.checkpoint_times.size());
    const double T = ens.checkpoint_times[C - 1];
    KahanSum s, s2;
    long n = 0;
    for (std::size_t i = 0; i < ens.dropped.size(); ++i) {
        if (ens.dropped[i]) continue;
        double v = ens.integrals[C - 1][i] / T;
        s.add(v);
        s2.add(v * v);
        ++n;
    }
    if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    double mean = s.value() / n;
    double var =
        n > 1 ? std::max(0.0, (s2.value() - n * mean * mean) / (n - 1)) : 0.0;
    return {mean, std::sqrt(var / n)};
}

HittingStats hitting_stats(const DriftSpec& drift,
                           const std::vector<Expression>& a, Point x0,
                           const SimConfig& cfg, const Ball& target) {
    const int dim = infer_dim(drift);
    validate(cfg, a, dim);
    {
        double dx = x0[0] - target.center[0];
        double dy = dim == 2 ? x0[1] - target.center[1] : 0.0;
        if (dx * dx + dy * dy <= target.radius * target.radius)
            throw Error("hitting_stats: start point is inside the target");
    }

    HittingStats hs;
    hs.n_paths = cfg.n_paths;
    const long steps = std::max<long>(1, std::llround(cfg.horizon / cfg.dt));
    const int C = std::min<long>(cfg.n_checkpoints, steps);
    hs.times.resize(C);
    for (int c = 0; c < C; ++c)
        hs.times[c] =
            std::llround(static_cast<double>(steps) * (c + 1) / C) * cfg.dt;

    BlockStepper stepper(drift, a, dim);
    const double sqdt = std::sqrt(cfg.dt);
    const double rad2 = target.radius * target.radius;
    std::vector<double> taus;

    for (long block = 0; block < cfg.n_paths; block += kBatch) {
        const int n =
            static_cast<int>(std::min<long>(kBatch, cfg.n_paths - block));
        double X[2][kBatch], bv[2][kBatch], sig[2][kBatch];
        bool active[kBatch];
        std::vector<PathRng> rng;
        rng.reserve(n);
        int n_active = n;
        for (int i = 0; i < n; ++i) {
            X[0][i] = x0[0];
            X[1][i] = dim == 2 ? x0[1] : 0.0;
            active[i] = true;
            rng.emplace_back(cfg.seed, cfg.stream_offset + block + i);
        }
        for (long step = 0; step < steps && n_active > 0; ++step) {
            stepper.eval(n, X[0], X[1], bv, sig);
            for (int i = 0; i < n; ++i) {
                if (!active[i]) continue;
                for (int ax = 0; ax < dim; ++ax)
                    X[ax][i] += bv[ax][i] * cfg.dt +
                                sig[ax][i] * sqdt * rng[i].normal();
                if (!std::isfinite(X[0][i]) ||
                    (dim == 2 && !std::isfinite(X[1][i]))) {
                    if (cfg.abort_on_nonfinite)
                        throw NonFiniteState(block + i, step);
                    active[i] = false;  // an exploding path never returns
                    --n_active;
                    continue;
                }
                double dx = X[0][i] - target.center[0];
                double dy = dim == 2 ? X[1][i] - target.center[1] : 0.0;
                if (dx * dx + dy * dy <= rad2) {
                    taus.push_back((step + 1) * cfg.dt);
                    active[i] = false;
                    --n_active;
                }
            }
        }
    }

    hs.n_hits = static_cast<long>(taus.size());
    hs.no_returns = hs.n_hits == 0;
    std::sort(taus.begin(), taus.end());
    hs.survival.resize(C);
    for (int c = 0; c < C; ++c) {
        long hit_by_t = std::upper_bound(taus.begin(), taus.end(),
                                         hs.times[c]) -
                        taus.begin();
        hs.survival[c] =
            static_cast<double>(cfg.n_paths - hit_by_t) / cfg.n_paths;
    }

    // log-linear fit of the survival tail, over the window where the
    // curve is both past its initial transient and still statistically
    // resolvable (at least ~20 surviving paths per point)
    auto collect = [&](double s_lo, double s_hi) {
        std::vector<std::pair<double, double>> pts;
        for (int c = 0; c < C; ++c)
            if (hs.survival[c] >= s_lo && hs.survival[c] <= s_hi)
                pts.emplace_back(hs.times[c], std::log(hs.survival[c]));
        return pts;
    };
    auto pts = collect(20.0 / cfg.n_paths, 0.5);
    if (pts.size() < 3) pts = collect(5.0 / cfg.n_paths, 0.9);
    if (pts.size() >= 3) {
        std::vector<double> tx, ty;
        for (auto& [t, s] : pts) tx.push_back(t), ty.push_back(s);
        Fit fit = least_squares(tx, ty);
        hs.fitted_rate = -fit.slope;
        hs.r_squared = fit.r_squared;
        hs.geometric = hs.fitted_rate > 0.0 && hs.r_squared >= 0.95;
    }

    if (hs.n_hits > 0 && hs.fitted_rate > 0.0) {
        hs.delta = hs.fitted_rate / 2.0;
        KahanSum s;
        for (double tau : taus) s.add(std::exp(hs.delta * tau));
        hs.e_delta_tau = s.value() / hs.n_hits;
    }
    return hs;
}

std::vector<double> occupation_measure(const PathEnsemble& ens,
                                       const Grid& grid, double burn_in) {
    if (ens.recorded_t.empty())
        throw Error("occupation_measure needs a recorded ensemble "
                    "(record_stride > 0)");
    std::vector<double> counts(grid.rows(), 0.0);
    double total = 0.0;
    const int n = grid.n_per_axis;
    for (std::size_t k = 0; k < ens.recorded_t.size(); ++k) {
        if (ens.recorded_t[k] < burn_in) continue;
        if (ens.dropped[ens.recorded_path[k]]) continue;
        int i = static_cast<int>(
            std::lround((ens.recorded_x1[k] + grid.radius) / grid.h));
        if (i < 0 || i >= n) continue;
        int cell = i;
        if (grid.dim == 2) {
            int j = static_cast<int>(
                std::lround((ens.recorded_x2[k] + grid.radius) / grid.h));
            if (j < 0 || j >= n) continue;
            cell = i * n + j;
        }
        int row = grid.lattice[cell];
        if (row < 0) continue;
        counts[row] += 1.0;
        total += 1.0;
    }
    if (total == 0.0)
        throw Error("occupation_measure: no samples after burn_in");
    const double vol = grid.cell_volume();
    for (double& c : counts) c /= total * vol;
    return counts;
}

double grid_integral(const Grid& grid, const std::vector<double>& density,
                     const std::vector<double>& values) {
    KahanSum s;
    const double vol = grid.cell_volume();
    for (int i = 0; i < grid.rows(); ++i) s.add(density[i] * values[i] * vol);
    return s.value();
}

}  // namespace eigendrift
