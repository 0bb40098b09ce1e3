#pragma once

#include <optional>
#include <vector>

#include "eigendrift/eig.hpp"

namespace eigendrift {

// Risk-sensitive control problem over a finite action set: drift
// components and the running cost are expressions in (x1[, x2], u),
// the diffusion coefficient is action-independent, and the running
// cost must be nonnegative on grid x actions.
struct ControlProblem {
    CoefficientSet coeffs;        // b[axis](x, u); running cost in coeffs.c
    std::vector<double> actions;  // finite action set, argmin ties by index
    Grid grid;                    // fixed working grid
    double tol = 1e-10;
    int max_iter = 200000;
};

// Action index per interior node.
using Policy = std::vector<int>;

struct TraceStep {
    int iteration = 0;
    double lambda = 0.0;
    int n_changed = 0;  // nodes whose action changed entering this iterate
};

struct HJBSolution {
    Eigen::VectorXd V;  // positive, 1 at the origin when the grid has one
    double lambda_star = 0.0;
    Policy policy;
    std::vector<TraceStep> trace;
    bool converged = false;
    bool monotone = true;  // lambda nonincreasing along the trace
};

// Policy iteration for min_u [L_u V + c(.,u) V] = Lambda* V. Starts from
// the pointwise cost minimizer unless an initial policy is given; each
// round freezes the policy, solves the principal eigenpair, and improves
// via argmin_u [b(x,u) . grad V(x) + c(x,u) V(x)] with ties broken
// toward the lowest action index. After max 100 rounds the best iterate
// is returned with converged=false.
HJBSolution solve_hjb(const ControlProblem& problem,
                      const std::optional<Policy>& initial_policy = {});

// Frozen-policy principal eigenvalue (cold start), for verification.
EigenPair policy_eigenpair(const ControlProblem& problem, const Policy& v);

struct OracleResult {
    double lambda_min = 0.0;
    Policy argmin;
    long n_policies = 0;
};

// Exhaustive minimum of lambda*_v over all |A|^n policies via dense
// eigensolves. Refuses instances with more than 600000 policies.
OracleResult enumerate_policies_oracle(const ControlProblem& problem);

// Blend toward a perturbed policy on a node subset; reports lambda*_{v_t}
// along the mixing ladder as a discrete continuity modulus.
struct Perturbation {
    std::vector<int> nodes;        // rows to perturb
    std::vector<int> new_actions;  // replacement action index per row
};

struct ContinuityReport {
    std::vector<double> t_values;
    std::vector<double> lambdas;
    double max_jump = 0.0;  // max |lambda_{t_{i+1}} - lambda_{t_i}|
};

ContinuityReport continuity_probe(const ControlProblem& problem,
                                  const Policy& base,
                                  const Perturbation& perturbation,
                                  const std::vector<double>& t_ladder);

}  // namespace eigendrift
