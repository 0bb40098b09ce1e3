#pragma once

#include <optional>

#include "eigendrift/eig.hpp"

namespace eigendrift {

struct LadderConfig {
    double r0 = 2.0;
    double growth = 1.5;
    int max_rungs = 8;
    double n_per_unit_length = 50.0;  // 12 is a practical d=2 default
    double tol_eig = 1e-10;
    int max_iter = 200000;
    double divergence_cap = 1e6;

    // node count keeping h fixed at 1/n_per_unit_length across rungs
    int n_for_radius(double r) const;
};

struct LadderRung {
    double r;
    int n_per_axis;
    double lambda;
};

// lambda_star(f) with the ground state on the largest grid.
struct GroundState {
    double lambda_star = 0.0;
    Grid grid;
    Eigen::VectorXd psi_star;              // normalized to 1 at the origin
    Eigen::VectorXd log_psi;
    std::vector<Point> grad_log_psi;       // per node
    std::vector<Point> twisted_drift;      // b + 2 a grad(log psi)
    std::vector<LadderRung> ladder;
    bool converged = false;
    std::optional<double> extrapolated;    // Richardson in 1/r^2
    double residual = 0.0;

    GridVectorField twisted_drift_field() const {
        return GridVectorField::from_points(grid, twisted_drift);
    }
    GridVectorField grad_field() const {
        return GridVectorField::from_points(grid, grad_log_psi);
    }
    GridScalarField psi_field() const {
        return {grid, {psi_star.data(), psi_star.data() + psi_star.size()}};
    }
};

GroundState lambda_star(const CoefficientSet& coeffs,
                        const LadderConfig& cfg = {},
                        double tol_outer = 1e-3);

// Central-difference gradient of log(psi) (one-sided at the boundary
// ring) and the induced twisted drift; called by lambda_star, exposed
// for recomputation after edits to psi_star.
void gradient_field(GroundState& gs, const CoefficientSet& coeffs);

// Richardson extrapolation of a ladder in 1/r^2 from its last two rungs.
std::optional<double> richardson_r2(const std::vector<LadderRung>& ladder);

}  // namespace eigendrift
