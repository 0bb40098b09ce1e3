#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "eigendrift/operator.hpp"

namespace eigendrift {

// Principal (Perron) eigenpair of a DiscreteOperator: the eigenvalue of
// maximal real part, simple, with a positive eigenvector.
struct EigenPair {
    double lambda = 0.0;
    Eigen::VectorXd psi;
    double residual = 0.0;  // ||A psi - lambda psi||_inf / ||psi||_inf
    int iterations = 0;
    int normalization_node = -1;
};

// Nonnegative-shift power iteration (all-ones start, or a warm start)
// followed by shifted inverse iteration until the Collatz-Wielandt gap
//   max_i (A v)_i / v_i - min_i (A v)_i / v_i
// drops below tol * |lambda| + tol.
EigenPair principal_eigenpair(const DiscreteOperator& op, double tol = 1e-10,
                              int max_iter = 200000,
                              const Eigen::VectorXd* warm_start = nullptr);

// Matrix-level solver used by principal_eigenpair and by the stationary
// density computation (which works on the transpose). Requires an
// irreducible essentially-nonnegative matrix.
struct MatrixEigenResult {
    double lambda;
    Eigen::VectorXd v;
    double residual;
    int iterations;
};
MatrixEigenResult perron_solve(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& A, double tol,
    int max_iter, const Eigen::VectorXd* warm_start = nullptr);

// Solves (s I - A) x = rhs for s above the Perron root (an M-matrix
// system: rhs >= 0 gives x >= 0). Used for Green-function-style positive
// supersolutions at shifted eigenvalues.
Eigen::VectorXd solve_shifted(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& A, double s,
    const Eigen::VectorXd& rhs);

// Dirichlet eigenvalue on the annulus (r, R) for each R in the ladder;
// the last rung is the estimate of the exterior-domain eigenvalue
// lambda_1(f, B_r^c). Disconnected d=1 annuli are solved per segment
// (the Perron value is the max over segments).
struct ExteriorLadder {
    double value = 0.0;
    std::vector<std::pair<double, double>> rungs;  // (R, lambda)
};
ExteriorLadder exterior_eigenvalue(const CoefficientSet& coeffs, double r,
                                   std::span<const double> R_ladder,
                                   int n_per_axis, double tol = 1e-10);

}  // namespace eigendrift
