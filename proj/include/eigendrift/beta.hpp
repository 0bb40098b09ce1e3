#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "eigendrift/exhaustion.hpp"

namespace eigendrift {

// The eigenvalue curve Lambda_beta = lambda_star(beta f). All betas are
// solved on the same fixed pair of grids (the last two ladder rungs), so
// the raw values inherit exact Perron monotonicity/convexity in beta;
// `lambdas_extrapolated` removes the O(1/r^2) Dirichlet truncation bias
// and backs the beta_c estimate.
struct BetaCurve {
    std::vector<double> betas;
    std::vector<double> lambdas;               // raw, largest grid
    std::vector<double> lambdas_extrapolated;  // Richardson in 1/r^2
    std::vector<char> converged;               // per beta
    std::vector<double> slopes;                // centered FD of extrapolated
    double beta_c_estimate = 0.0;              // -inf if never flat
    double lambda_c = 0.0;                     // inf over computed lambdas
    double slope_tol = 1e-3;
};

struct CurveConfig {
    LadderConfig ladder{};
    double slope_tol = 1e-3;
    int bisect_depth = 20;
    bool skip_bump_check = false;  // override the C_o heuristic on f
    double tol_outer = 1e-3;       // convergence proxy between the two grids
};

BetaCurve lambda_curve(const CoefficientSet& coeffs,
                       const std::vector<double>& betas,
                       const CurveConfig& cfg = {});

// Discrete stationary density of the diffusion with the given drift:
// the left Perron vector of the assembled (f == 0) generator, normalized
// so sum(eta) * h^d = 1.
struct StationaryDensity {
    Grid grid;
    std::vector<double> eta;
    double residual = 0.0;  // ||A^T eta||_inf / ||eta||_inf
    double lambda = 0.0;    // Perron value of the transpose (near 0)
    bool transience_suspected = false;  // > 25% of mass in the outer shell

    double integral(const std::vector<double>& values) const;
};

using DriftLike = std::variant<GridVectorField, std::vector<Expression>>;

StationaryDensity stationary_density(const DriftLike& drift,
                                     const CoefficientSet& coeffs,
                                     const Grid& grid, double tol = 1e-10);

// Theorem-2.5(iii) style identity: Lambda_beta vs
// integral of (beta f - |grad psi*_beta|^2_a) against mu*_beta.
struct ErgodicIdentity {
    double lhs = 0.0;  // Lambda_beta on the working grid
    double rhs = 0.0;
    double residual = 0.0;
    std::optional<std::string> hypothesis_violated;
    StationaryDensity density;
};

ErgodicIdentity ergodic_identity_check(const CoefficientSet& coeffs,
                                       double beta,
                                       const LadderConfig& ladder = {});

// Theorem-2.8 derivative identity with the one-sided sandwich bound.
struct DerivativeCheck {
    double fd_slope = 0.0;  // (Lambda_{b+db} - Lambda_{b-db}) / 2 db
    double mu_f = 0.0;      // integral of f against mu*_beta
    double residual = 0.0;
    double sandwich_lower = 0.0;  // eps mu(f Psi~)/mu(Psi~)
    double left_increment = 0.0;  // Lambda_beta - Lambda_{beta-db}
    bool sandwich_ok = false;
};

DerivativeCheck derivative_check(const CoefficientSet& coeffs, double beta,
                                 double d_beta,
                                 const LadderConfig& ladder = {});

// Theorem-2.7 duality identity residual for a probe control v.
using ControlField = std::variant<GridVectorField, std::vector<Expression>>;

struct DualityResidual {
    double cost = 0.0;          // integral of F_v = |v|^2_a - beta f
    double excess = 0.0;        // integral of |v - grad psi*|^2_a
    double identity_rhs = 0.0;  // -Lambda_beta + excess
    double residual = 0.0;
    double lambda_beta = 0.0;
};

DualityResidual duality_residual(const CoefficientSet& coeffs, double beta,
                                 const ControlField& v,
                                 const LadderConfig& ladder = {});

}  // namespace eigendrift
