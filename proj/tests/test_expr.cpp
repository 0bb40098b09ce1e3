#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "eigendrift/expr.hpp"

using namespace eigendrift;

TEST_CASE("polynomial evaluation") {
    auto e = Expression::parse("x1^2");
    CHECK(e(2.0) == doctest::Approx(4.0));
    CHECK(e.serialize() == "x1^2");
}

TEST_CASE("sign convention") {
    auto e = Expression::parse("sign(x1)");
    CHECK(e(-0.5) == -1.0);
    CHECK(e(0.0) == 0.0);
    CHECK(e(3.0) == 1.0);
}

TEST_CASE("arithmetic and precedence") {
    CHECK(Expression::parse("(3/2)*x1")(1.0) == doctest::Approx(1.5));
    CHECK(Expression::parse("2*x1")(3.0) == doctest::Approx(6.0));
    CHECK(Expression::parse("exp(-(x1^2))")(0.0) == doctest::Approx(1.0));
    CHECK(Expression::parse("2^3^2")(0.0) == doctest::Approx(512.0));  // right-assoc
    CHECK(Expression::parse("2*3+4")(0.0) == doctest::Approx(10.0));
    CHECK(Expression::parse("2+3*4")(0.0) == doctest::Approx(14.0));
    CHECK(Expression::parse("x^-2")(2.0) == doctest::Approx(0.25));
    CHECK(Expression::parse("1e-3")(0.0) == doctest::Approx(1e-3));
}

TEST_CASE("x aliases x1") {
    auto e = Expression::parse("x+x1");
    CHECK(e(1.5) == doctest::Approx(3.0));
    CHECK(!e.uses(Var::X2));
    CHECK(e.uses(Var::X1));
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(Expression::parse("min(x1,"), SyntaxError);
    try {
        Expression::parse("min(x1,");
    } catch (const SyntaxError& err) {
        CHECK(err.offset == 7);
    }
    CHECK_THROWS_AS(Expression::parse("foo(x1)"), UnknownIdentifier);
    CHECK_THROWS_AS(Expression::parse("y+1"), UnknownIdentifier);
    CHECK_THROWS_AS(Expression::parse("min(x1)"), ArityError);
    CHECK_THROWS_AS(Expression::parse("sin(x1,x2)"), ArityError);
    CHECK_THROWS_AS(Expression::parse("x1^^2"), SyntaxError);
    CHECK_THROWS_AS(Expression::parse(""), SyntaxError);
    CHECK_THROWS_AS(Expression::parse("0x10"), SyntaxError);
}

TEST_CASE("evaluation errors") {
    CHECK_THROWS_AS(Expression::parse("1/x1").evaluate({0.0, {}, {}}),
                    DomainError);
    CHECK_THROWS_AS(Expression::parse("log(x1)").evaluate({-1.0, {}, {}}),
                    DomainError);
    CHECK_THROWS_AS(Expression::parse("sqrt(x1)").evaluate({-1.0, {}, {}}),
                    DomainError);
    CHECK_THROWS_AS(Expression::parse("x1+u").evaluate({1.0, {}, {}}),
                    UnboundVariable);
}

namespace {

// Random AST generator for the round-trip property.
AstNode random_ast(std::mt19937& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 6);
    AstNode n;
    switch (pick(rng)) {
        case 0: {
            n.kind = AstNode::Kind::Constant;
            std::uniform_real_distribution<double> val(0.0, 10.0);
            n.value = val(rng);
            break;
        }
        case 1: {
            n.kind = AstNode::Kind::Variable;
            std::uniform_int_distribution<int> v(0, 2);
            n.var = static_cast<Var>(v(rng));
            break;
        }
        case 2: {
            n.kind = AstNode::Kind::Unary;
            n.op = '-';
            n.args.push_back(random_ast(rng, depth - 1));
            break;
        }
        case 3:
        case 4:
        case 5: {
            n.kind = AstNode::Kind::Binary;
            const char ops[5] = {'+', '-', '*', '/', '^'};
            std::uniform_int_distribution<int> o(0, 4);
            n.op = ops[o(rng)];
            n.args.push_back(random_ast(rng, depth - 1));
            n.args.push_back(random_ast(rng, depth - 1));
            break;
        }
        default: {
            n.kind = AstNode::Kind::Call;
            std::uniform_int_distribution<int> f(0, 9);
            n.func = f(rng);
            int arity = n.func >= 8 ? 2 : 1;  // min/max are the last two
            for (int i = 0; i < arity; ++i)
                n.args.push_back(random_ast(rng, depth - 1));
            break;
        }
    }
    return n;
}

}  // namespace

TEST_CASE("serialize/reparse round trip") {
    auto check_roundtrip = [](const std::string& text) {
        auto e = Expression::parse(text);
        auto e2 = Expression::parse(e.serialize());
        CHECK(e == e2);
        CHECK(e2.serialize() == e.serialize());
    };
    check_roundtrip("-x1^2");
    check_roundtrip("(-x1)^2");
    check_roundtrip("x1-(x2-u)");
    check_roundtrip("x1/(x2*u)");
    check_roundtrip("x1/x2/u");
    check_roundtrip("(x1^2)^3");
    check_roundtrip("x1^2^3");
    check_roundtrip("min(x1+1,max(x2,-u))");
    check_roundtrip("-(x1+x2)");
    check_roundtrip("2*-x1");  // unary minus as a factor
}

namespace {

// independent printer used to fuzz the round trip from random ASTs
std::string fuzz_print(const AstNode& n) {
    // fully parenthesized rendering; parse of this must equal the ast
    switch (n.kind) {
        case AstNode::Kind::Constant: {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", n.value);
            return buf;
        }
        case AstNode::Kind::Variable:
            return var_name(n.var);
        case AstNode::Kind::Unary:
            return "(-" + fuzz_print(n.args[0]) + ")";
        case AstNode::Kind::Binary:
            return "(" + fuzz_print(n.args[0]) + std::string(1, n.op) +
                   fuzz_print(n.args[1]) + ")";
        case AstNode::Kind::Call: {
            const char* names[10] = {"sin", "cos",  "exp", "log", "sqrt",
                                     "tanh", "abs", "sign", "min", "max"};
            std::string s = std::string(names[n.func]) + "(";
            for (std::size_t i = 0; i < n.args.size(); ++i) {
                if (i) s += ",";
                s += fuzz_print(n.args[i]);
            }
            return s + ")";
        }
    }
    return "";
}

}  // namespace

TEST_CASE("minimal-parenthesis printing is stable on fuzzed asts") {
    std::mt19937 rng(777);
    for (int trial = 0; trial < 1000; ++trial) {
        AstNode ast = random_ast(rng, 4);
        auto ref = Expression::parse(fuzz_print(ast));
        CHECK(ref.ast() == ast);
        auto again = Expression::parse(ref.serialize());
        CHECK(again == ref);
    }
}

TEST_CASE("whitelist functions agree with the host math library") {
    struct Case {
        const char* text;
        double (*fn)(double);
        double lo, hi;
    };
    const Case cases[] = {
        {"sin(x1)", std::sin, -50.0, 50.0},
        {"cos(x1)", std::cos, -50.0, 50.0},
        {"exp(x1)", std::exp, -50.0, 50.0},
        {"log(x1)", std::log, 1e-6, 1e6},
        {"sqrt(x1)", std::sqrt, 0.0, 1e6},
        {"tanh(x1)", std::tanh, -20.0, 20.0},
        {"abs(x1)", std::fabs, -1e6, 1e6},
    };
    std::mt19937 rng(42);
    for (const auto& c : cases) {
        auto e = Expression::parse(c.text);
        std::uniform_real_distribution<double> dist(c.lo, c.hi);
        for (int i = 0; i < 10000; ++i) {
            double x = dist(rng);
            double got = e(x);
            double want = c.fn(x);
            // 1 ulp
            CHECK(std::abs(got - want) <=
                  std::abs(std::nextafter(want, INFINITY) - want));
        }
    }
    // binary min/max
    auto emin = Expression::parse("min(x1,x2)");
    auto emax = Expression::parse("max(x1,x2)");
    std::uniform_real_distribution<double> d(-100, 100);
    for (int i = 0; i < 10000; ++i) {
        double a = d(rng), b = d(rng);
        CHECK(emin(a, b) == std::min(a, b));
        CHECK(emax(a, b) == std::max(a, b));
    }
}

TEST_CASE("batch evaluation matches scalar evaluation") {
    auto e = Expression::parse(
        "1+(3/2)*min(abs(x1),1)/2+3*(1-min(abs(x1),1)^2)/4-"
        "((3/2)*min(abs(x1),1)-(1/2)*min(abs(x1),1)^3)^2/4");
    BatchEval be(e);
    double xs[kBatch], out[kBatch];
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> d(-3, 3);
    for (int i = 0; i < kBatch; ++i) xs[i] = d(rng);
    be(kBatch, xs, nullptr, nullptr, out);
    for (int i = 0; i < kBatch; ++i)
        CHECK(out[i] == doctest::Approx(e(xs[i])).epsilon(1e-14));
}
