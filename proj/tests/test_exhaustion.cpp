#include <doctest.h>

#include <cmath>
#include <random>

#include "eigendrift/exhaustion.hpp"

using namespace eigendrift;

TEST_CASE("quadratic anchor: a=1/2, b=(3/2)x, f=x^2 gives lambda = -1") {
    CoefficientSet cs = CoefficientSet::make(1, {"0.5"}, {"1.5*x1"}, "x1^2");
    LadderConfig lad;
    lad.max_rungs = 6;
    GroundState gs = lambda_star(cs, lad);
    CHECK(gs.lambda_star == doctest::Approx(-1.0).epsilon(2e-2));
    CHECK(gs.converged);
    // exhaustion values increase toward lambda_star
    for (std::size_t i = 0; i + 1 < gs.ladder.size(); ++i)
        CHECK(gs.ladder[i + 1].lambda >= gs.ladder[i].lambda - 1e-12);

    // twisted drift is -x/2 (psi* = exp(-x^2), b + 2 a grad log psi)
    double sup_err = 0.0;
    for (int i = 0; i < gs.grid.rows(); ++i) {
        double x = gs.grid.nodes[i][0];
        if (std::abs(x) > 3.0) continue;
        sup_err = std::max(sup_err,
                           std::abs(gs.twisted_drift[i][0] - (-0.5 * x)));
    }
    CHECK(sup_err < 5e-2);

    // ground state matches exp(-x^2) pointwise
    for (int i = 0; i < gs.grid.rows(); ++i) {
        double x = gs.grid.nodes[i][0];
        if (std::abs(x) > 2.0) continue;
        CHECK(gs.psi_star[i] ==
              doctest::Approx(std::exp(-x * x)).epsilon(3e-2));
    }
}

TEST_CASE("Ornstein-Uhlenbeck generator with quadratic drift: a=1, b=2x") {
    // psi* = exp(-x^2) solves a psi'' + 2x psi' = -2 psi, so
    // lambda*(0) = -2 (h-transform to the harmonic oscillator
    // d^2 - (x^2 + 1), whose top eigenvalue is -2)
    CoefficientSet cs = CoefficientSet::make(1, {"1"}, {"2*x1"}, "0");
    LadderConfig lad;
    lad.max_rungs = 6;
    GroundState gs = lambda_star(cs, lad);
    CHECK(gs.lambda_star == doctest::Approx(-2.0).epsilon(2e-2));
    for (int i = 0; i < gs.grid.rows(); ++i) {
        double x = gs.grid.nodes[i][0];
        if (std::abs(x) > 2.0) continue;
        CHECK(gs.psi_star[i] ==
              doctest::Approx(std::exp(-x * x)).epsilon(3e-2));
        CHECK(std::abs(gs.twisted_drift[i][0] - (-2.0 * x)) < 0.1);
    }
}

TEST_CASE("unconfined quadratic potential diverges") {
    CoefficientSet cs = CoefficientSet::make(1, {"0.5"}, {"0"}, "x1^2");
    LadderConfig lad;
    lad.max_rungs = 8;
    CHECK_THROWS_AS(lambda_star(cs, lad), LadderDiverged);
}

TEST_CASE("diagonal shift exactness: lambda*(f + c) = lambda*(f) + c") {
    CoefficientSet cs = CoefficientSet::make(1, {"0.5"}, {"-x1"}, "sin(x1)");
    LadderConfig lad;
    lad.max_rungs = 4;
    GroundState g0 = lambda_star(cs, lad);
    GroundState g1 = lambda_star(
        cs.with_f(Expression::parse("sin(x1)+1.75")), lad);
    CHECK(std::abs(g1.lambda_star - g0.lambda_star - 1.75) < 1e-10);
}

TEST_CASE("ladders are monotone on fuzzed stable problems") {
    std::mt19937 rng(424242);
    std::uniform_real_distribution<double> ua(0.3, 1.5);
    std::uniform_real_distribution<double> uk(0.5, 2.0);
    std::uniform_real_distribution<double> uf(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        char ab[64], bb[64], fb[96];
        std::snprintf(ab, sizeof(ab), "%.3f", ua(rng));
        std::snprintf(bb, sizeof(bb), "-%.3f*x1", uk(rng));
        std::snprintf(fb, sizeof(fb), "%.3f*exp(-x1^2)+%.3f*cos(x1)",
                      uf(rng), 0.3 * uf(rng));
        CoefficientSet cs = CoefficientSet::make(1, {ab}, {bb}, fb);
        LadderConfig lad;
        lad.max_rungs = 5;
        lad.n_per_unit_length = 30.0;
        GroundState gs = lambda_star(cs, lad);
        REQUIRE(gs.ladder.size() >= 2);
        for (std::size_t i = 0; i + 1 < gs.ladder.size(); ++i)
            CHECK(gs.ladder[i + 1].lambda >= gs.ladder[i].lambda - 1e-10);
        CHECK(std::isfinite(gs.lambda_star));
    }
}

TEST_CASE("Richardson extrapolation removes the 1/r^2 truncation bias") {
    // pure 1-D Brownian motion: lambda*(0) = 0, ladder values are
    // -a (pi/2r)^2; the extrapolated value should be much closer to 0
    CoefficientSet cs = CoefficientSet::make(1, {"1"}, {"0"}, "0");
    LadderConfig lad;
    lad.max_rungs = 6;
    GroundState gs = lambda_star(cs, lad);
    double raw = gs.ladder.back().lambda;
    REQUIRE(gs.extrapolated.has_value());
    CHECK(std::abs(*gs.extrapolated) < 0.2 * std::abs(raw));
}

TEST_CASE("gradient field recomputation is idempotent") {
    CoefficientSet cs = CoefficientSet::make(1, {"0.5"}, {"-x1"}, "0");
    LadderConfig lad;
    lad.max_rungs = 4;
    GroundState gs = lambda_star(cs, lad);
    std::vector<Point> before = gs.grad_log_psi;
    gradient_field(gs, cs);
    for (int i = 0; i < gs.grid.rows(); ++i)
        CHECK(gs.grad_log_psi[i][0] == doctest::Approx(before[i][0]));
}
