#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "eigendrift/expr.hpp"
#include "eigendrift/grid.hpp"

namespace eigendrift {

struct SimConfig {
    double dt = 1e-3;
    double horizon = 1.0;
    long n_paths = 1;
    std::uint64_t seed = 0;
    double box_radius = std::numeric_limits<double>::infinity();
    int record_stride = 0;   // 0 disables trajectory recording
    int n_checkpoints = 10;  // at horizon * k / n_checkpoints
    bool abort_on_nonfinite = false;  // default: mark-and-drop
    std::uint64_t stream_offset = 0;  // shifts the per-path RNG streams
};

// Drift given either as one expression per axis or as a grid field
// (multilinear inside the grid box, nearest-node outside).
struct DriftSpec {
    std::vector<Expression> exprs;
    std::optional<GridVectorField> field;

    static DriftSpec from_exprs(std::vector<Expression> e) {
        return {std::move(e), {}};
    }
    static DriftSpec from_field(GridVectorField f) {
        return {{}, std::move(f)};
    }
};

struct PathEnsemble {
    int dim = 1;
    SimConfig cfg;
    std::vector<double> checkpoint_times;
    std::vector<std::vector<Point>> states;      // [checkpoint][path]
    std::vector<std::vector<double>> integrals;  // [checkpoint][path]
    std::vector<char> dropped;                   // per path
    // thinned trajectory samples for occupation measures / CSV export
    std::vector<float> recorded_t;
    std::vector<float> recorded_x1, recorded_x2;
    std::vector<float> recorded_s;
    std::vector<std::int32_t> recorded_path;
    double excursion_fraction = 0.0;

    long n_alive() const;
};

// Euler-Maruyama with fixed dt and per-path counter-based RNG streams;
// bit-exact reproducible for a given (seed, cfg). sigma = sqrt(2 a)
// per axis. `integrand` accumulates int_0^t f(X_s) ds per path.
PathEnsemble simulate(const DriftSpec& drift,
                      const std::vector<Expression>& a, Point x0,
                      const SimConfig& cfg,
                      const Expression* integrand = nullptr);

// Optional weight g(X_T) for Feynman-Kac functionals.
using WeightSpec =
    std::variant<std::monostate, Expression, GridScalarField>;

struct FkEstimate {
    std::vector<double> times;
    std::vector<double> log_mean;  // L(T) = log (1/n) sum exp(S_i - shift*T) g_i
    std::vector<double> std_err;   // delta method
    std::vector<double> ess;       // effective sample size per checkpoint
    double slope = 0.0;            // least squares over the last half
    double slope_stderr = 0.0;     // batch means over path groups
    bool degenerate = false;
};

FkEstimate feynman_kac(const PathEnsemble& ens, double lambda_shift = 0.0,
                       const WeightSpec& g = {},
                       bool throw_on_degenerate = true);

// Plain time-average of the running integral at the final checkpoint
// (the Jensen lower bound for the Feynman-Kac slope).
struct MeanEstimate {
    double value;
    double std_err;
};
MeanEstimate ergodic_average(const PathEnsemble& ens);

struct Ball {
    Point center{0.0, 0.0};
    double radius = 1.0;
};

struct HittingStats {
    std::vector<double> times;     // survival-curve abscissae
    std::vector<double> survival;  // P(tau > t)
    double fitted_rate = 0.0;      // log-linear tail fit of survival
    double r_squared = 0.0;
    bool geometric = false;  // tail fit R^2 >= 0.95
    double delta = 0.0;      // fitted_rate / 2
    double e_delta_tau = std::numeric_limits<double>::quiet_NaN();
    long n_hits = 0;
    long n_paths = 0;
    bool no_returns = false;
};

// Fresh simulation from x0 until the target ball is hit (or horizon).
HittingStats hitting_stats(const DriftSpec& drift,
                           const std::vector<Expression>& a, Point x0,
                           const SimConfig& cfg, const Ball& target);

// Time-average histogram of recorded samples after burn_in, returned as
// a density on grid cells (sum * h^d = 1).
std::vector<double> occupation_measure(const PathEnsemble& ens,
                                       const Grid& grid, double burn_in);

// Grid integral sum_i w[i] rho[i] h^d.
double grid_integral(const Grid& grid, const std::vector<double>& density,
                     const std::vector<double>& values);

}  // namespace eigendrift
