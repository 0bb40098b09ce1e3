#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eigendrift {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- expression language ----

struct SyntaxError : Error {
    SyntaxError(std::size_t offset_, std::string expected_)
        : Error("syntax error at offset " + std::to_string(offset_) +
                ", expected " + expected_),
          offset(offset_), expected(std::move(expected_)) {}
    std::size_t offset;
    std::string expected;
};

struct UnknownIdentifier : Error {
    explicit UnknownIdentifier(std::string name_)
        : Error("unknown identifier '" + name_ + "'"), name(std::move(name_)) {}
    std::string name;
};

struct ArityError : Error {
    ArityError(std::string function_, int got_, int want_)
        : Error("function '" + function_ + "' takes " + std::to_string(want_) +
                " argument(s), got " + std::to_string(got_)),
          function(std::move(function_)), got(got_), want(want_) {}
    std::string function;
    int got;
    int want;
};

struct UnboundVariable : Error {
    explicit UnboundVariable(std::string name_)
        : Error("unbound variable '" + name_ + "'"), name(std::move(name_)) {}
    std::string name;
};

struct DomainError : Error {
    DomainError(std::string op_, double operand_)
        : Error("domain error in '" + op_ + "' at operand " +
                std::to_string(operand_)),
          op(std::move(op_)), operand(operand_) {}
    std::string op;
    double operand;
};

// ---- grids and operators ----

struct BadRadius : Error {
    using Error::Error;
};

struct EvenNodeCount : Error {
    using Error::Error;
};

struct EllipticityViolation : Error {
    explicit EllipticityViolation(int node_)
        : Error("diffusion coefficient not positive at node " +
                std::to_string(node_)),
          node(node_) {}
    int node;
};

struct UnboundedBelow : Error {
    explicit UnboundedBelow(int node_)
        : Error("potential below declared lower bound at node " +
                std::to_string(node_)),
          node(node_) {}
    int node;
};

struct NonDiagonalDiffusion2D : Error {
    using Error::Error;
};

// ---- eigensolvers ----

struct NotConverged : Error {
    NotConverged(int iterations_, double last_residual_)
        : Error("eigensolve did not converge after " +
                std::to_string(iterations_) +
                " iterations (residual " + std::to_string(last_residual_) + ")"),
          iterations(iterations_), last_residual(last_residual_) {}
    int iterations;
    double last_residual;
};

struct DisconnectedInterior : Error {
    using Error::Error;
};

struct LadderDiverged : Error {
    using Error::Error;
};

// ---- simulation ----

struct NonFiniteState : Error {
    NonFiniteState(long path_, long step_)
        : Error("non-finite state on path " + std::to_string(path_) +
                " at step " + std::to_string(step_)),
          path(path_), step(step_) {}
    long path;
    long step;
};

struct DegenerateWeights : Error {
    explicit DegenerateWeights(double ess_)
        : Error("importance weights collapsed (effective sample size " +
                std::to_string(ess_) + ")"),
          ess(ess_) {}
    double ess;
};

// ---- probes ----

struct NonVanishingBump : Error {
    using Error::Error;
};

struct NotPositive : Error {
    using Error::Error;
};

// ---- identities ----

struct HypothesisViolated : Error {
    explicit HypothesisViolated(std::string reason_)
        : Error("theorem hypothesis violated: " + reason_),
          reason(std::move(reason_)) {}
    std::string reason;
};

// ---- control ----

struct TooLarge : Error {
    using Error::Error;
};

}  // namespace eigendrift
