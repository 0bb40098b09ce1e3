#include <doctest.h>

#include <Eigen/SparseCore>
#include <cmath>
#include <random>

#include "eigendrift/operator.hpp"

using namespace eigendrift;

TEST_CASE("2-D unit ball on a 5x5 lattice has 9 interior nodes") {
    Grid g = build_grid(2, 1.0, 0.0, 5);
    CHECK(g.rows() == 9);
    CHECK(g.origin_row >= 0);
    CHECK(g.nodes[g.origin_row][0] == doctest::Approx(0.0));
    CHECK(g.nodes[g.origin_row][1] == doctest::Approx(0.0));
}

TEST_CASE("grid rejects bad shapes") {
    CHECK_THROWS_AS(build_grid(1, 2.0, 0.0, 10), EvenNodeCount);
    CHECK_THROWS_AS(build_grid(1, -1.0, 0.0, 11), BadRadius);
    CHECK_THROWS_AS(build_grid(1, 1.0, 2.0, 11), BadRadius);
}

TEST_CASE("1-D ball grid: interior nodes exclude the endpoints") {
    Grid g = build_grid(1, 1.0, 0.0, 11);
    CHECK(g.rows() == 9);
    for (int i = 0; i < g.rows(); ++i) CHECK(std::abs(g.nodes[i][0]) < 1.0);
    // neighbors walk the lattice; boundary ring sees the Dirichlet exterior
    int left_end = 0;
    for (int i = 0; i < g.rows(); ++i)
        if (g.nodes[i][0] < g.nodes[left_end][0]) left_end = i;
    CHECK(g.neighbor(left_end, 0, -1) == -1);
    CHECK(g.neighbor(left_end, 0, +1) >= 0);
}

TEST_CASE("annulus grid excludes the hole") {
    Grid g = build_grid(1, 2.0, 1.0, 21);
    for (int i = 0; i < g.rows(); ++i) {
        double r = std::abs(g.nodes[i][0]);
        CHECK(r > 1.0);
        CHECK(r < 2.0);
    }
    CHECK(g.origin_row == -1);
}

TEST_CASE("scalar field interpolation is exact on affine functions") {
    Grid g = build_grid(2, 3.0, 0.0, 31);
    GridScalarField f{g, {}};
    f.values.resize(g.rows());
    for (int i = 0; i < g.rows(); ++i)
        f.values[i] = 2.0 * g.nodes[i][0] - 0.5 * g.nodes[i][1] + 1.0;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int k = 0; k < 50; ++k) {
        Point p{u(rng), u(rng)};
        CHECK(f.at(p) ==
              doctest::Approx(2.0 * p[0] - 0.5 * p[1] + 1.0).epsilon(1e-9));
    }
}

TEST_CASE("vector field at_node matches per-axis storage") {
    Grid g = build_grid(1, 2.0, 0.0, 21);
    std::vector<Point> v(g.rows());
    for (int i = 0; i < g.rows(); ++i) v[i] = {g.nodes[i][0] * 3.0, 0.0};
    GridVectorField fld = GridVectorField::from_points(g, v);
    for (int i = 0; i < g.rows(); ++i)
        CHECK(fld.at_node(i)[0] == doctest::Approx(3.0 * g.nodes[i][0]));
}

TEST_CASE("assembled operator is essentially nonnegative (fuzz)") {
    std::mt19937 rng(20240817);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> ua(0.2, 2.0);
    for (int trial = 0; trial < 25; ++trial) {
        int dim = trial % 2 + 1;
        char abuf[64], bbuf[64];
        std::snprintf(abuf, sizeof(abuf), "%.3f", ua(rng));
        std::snprintf(bbuf, sizeof(bbuf), "%.3f*x1+%.3f", u(rng), u(rng));
        CoefficientSet cs = CoefficientSet::make(
            dim, std::vector<std::string>(dim, abuf),
            std::vector<std::string>(dim, bbuf), "sin(x1)");
        Grid g = build_grid(dim, 2.0, 0.0, dim == 1 ? 41 : 15);
        DiscreteOperator op = assemble(g, cs);
        for (int r = 0; r < op.A.outerSize(); ++r)
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator
                     it(op.A, r);
                 it; ++it)
                if (it.row() != it.col()) CHECK(it.value() >= 0.0);
    }
}

TEST_CASE("zero-coefficient row sums vanish away from the boundary") {
    CoefficientSet cs = CoefficientSet::make(1, {"1"}, {"0.7"}, "0");
    Grid g = build_grid(1, 2.0, 0.0, 41);
    DiscreteOperator op = assemble(g, cs);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(g.rows());
    Eigen::VectorXd rs = op.A * ones;
    for (int i = 0; i < g.rows(); ++i) {
        bool ring = g.neighbor(i, 0, -1) < 0 || g.neighbor(i, 0, +1) < 0;
        if (!ring) CHECK(std::abs(rs[i]) < 1e-9);
    }
}

TEST_CASE("diagonal f shift moves exactly the diagonal") {
    CoefficientSet cs = CoefficientSet::make(1, {"0.5"}, {"-x1"}, "x1^2");
    Grid g = build_grid(1, 3.0, 0.0, 61);
    DiscreteOperator op0 = assemble(g, cs);
    DiscreteOperator op1 =
        assemble(g, cs.with_f(Expression::parse("x1^2+2.5")));
    Eigen::SparseMatrix<double, Eigen::RowMajor> diff = op1.A - op0.A;
    for (int r = 0; r < diff.outerSize(); ++r)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
                 diff, r);
             it; ++it) {
            if (it.row() == it.col())
                CHECK(it.value() == doctest::Approx(2.5).epsilon(1e-12));
            else
                CHECK(std::abs(it.value()) < 1e-14);
        }
}

TEST_CASE("assembly validates ellipticity and the f lower bound") {
    CoefficientSet bad_a = CoefficientSet::make(1, {"-1"}, {"0"}, "0");
    Grid g = build_grid(1, 1.0, 0.0, 11);
    CHECK_THROWS_AS(assemble(g, bad_a), EllipticityViolation);

    CoefficientSet bad_f = CoefficientSet::make(1, {"1"}, {"0"}, "-x1^2");
    bad_f.f_lower_bound = -0.1;
    CHECK_THROWS_AS(assemble(g, bad_f), UnboundedBelow);
}

TEST_CASE("control values reach the drift and cost expressions") {
    CoefficientSet cs = CoefficientSet::make(1, {"1"}, {"u"}, "0");
    cs.c = Expression::parse("x1^2+u^2");
    Grid g = build_grid(1, 1.0, 0.0, 11);
    NodeFields fields = sample_coefficients(g, cs, Control{2.0});
    for (int i = 0; i < g.rows(); ++i) CHECK(fields.b[i][0] == 2.0);
}

TEST_CASE("hybrid drift scheme agrees with the generator on smooth data") {
    // apply A to samples of a smooth function and compare with
    // a u'' + b u' pointwise
    CoefficientSet cs = CoefficientSet::make(1, {"1"}, {"0.5*x1"}, "0");
    Grid g = build_grid(1, 2.0, 0.0, 401);
    DiscreteOperator op = assemble(g, cs);
    Eigen::VectorXd u(g.rows());
    for (int i = 0; i < g.rows(); ++i) u[i] = std::sin(g.nodes[i][0]);
    Eigen::VectorXd Au = op.A * u;
    for (int i = 0; i < g.rows(); ++i) {
        double x = g.nodes[i][0];
        if (std::abs(x) > 1.5) continue;  // skip the Dirichlet ring
        double exact = -std::sin(x) + 0.5 * x * std::cos(x);
        CHECK(std::abs(Au[i] - exact) < 2e-3);
    }
}
