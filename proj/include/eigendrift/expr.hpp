#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eigendrift/errors.hpp"

namespace eigendrift {

enum class Var : std::uint8_t { X1 = 0, X2 = 1, U = 2 };

const char* var_name(Var v);

struct AstNode {
    enum class Kind : std::uint8_t { Constant, Variable, Unary, Binary, Call };
    Kind kind = Kind::Constant;
    double value = 0.0;  // Constant
    Var var = Var::X1;   // Variable
    char op = 0;         // Binary: '+','-','*','/','^'; Unary: '-'
    int func = -1;       // Call: index into the function table
    std::vector<AstNode> args;

    bool operator==(const AstNode& o) const;
};

// Postfix program compiled from an AST; one instruction per node.
enum class OpCode : std::uint8_t {
    Const, LoadX1, LoadX2, LoadU,
    Add, Sub, Mul, Div, Neg, Pow, PowInt,
    Sin, Cos, Exp, Log, Sqrt, Tanh, Abs, Sign, Min, Max,
};

struct Instr {
    OpCode op;
    double value = 0.0;  // Const payload or PowInt exponent
};

struct Bindings {
    std::optional<double> x1;
    std::optional<double> x2;
    std::optional<double> u;
};

// Immutable parsed expression in the coefficient language.
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | power
//   power  := atom ('^' factor)?
//   atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//
// Variables are x1, x2, u (with x as an alias of x1). Functions:
// sin cos exp log sqrt tanh abs sign min max. sign(0) = 0.
class Expression {
  public:
    static Expression parse(std::string_view text);
    static Expression constant(double c);

    // Checked scalar evaluation: throws UnboundVariable / DomainError.
    double evaluate(const Bindings& b) const;
    double operator()(double x1) const { return evaluate({x1, {}, {}}); }
    double operator()(double x1, double x2) const {
        return evaluate({x1, x2, {}});
    }

    std::string serialize() const;

    bool uses(Var v) const { return (free_vars_ >> static_cast<int>(v)) & 1; }
    bool has_free_vars() const { return free_vars_ != 0; }

    const AstNode& ast() const { return *root_; }
    const std::vector<Instr>& program() const { return program_; }
    int stack_depth() const { return stack_depth_; }

    bool operator==(const Expression& o) const { return *root_ == *o.root_; }

  private:
    Expression() = default;
    void finish();  // compute free vars + compile

    std::shared_ptr<const AstNode> root_;
    std::vector<Instr> program_;
    std::uint8_t free_vars_ = 0;
    int stack_depth_ = 0;
};

inline constexpr int kBatch = 64;

// Unchecked batched evaluation of a compiled program over up to kBatch
// points at once. Domain violations produce non-finite values instead of
// throwing; callers in the simulation layer treat those as path explosions.
class BatchEval {
  public:
    explicit BatchEval(const Expression& e);

    // n <= kBatch; x2/u may be null when the expression does not use them.
    void operator()(int n, const double* x1, const double* x2, const double* u,
                    double* out) const;

    // Convenience scalar wrapper (still unchecked).
    double at(double x1, double x2 = 0.0, double u = 0.0) const {
        double out;
        (*this)(1, &x1, &x2, &u, &out);
        return out;
    }

  private:
    std::vector<Instr> program_;
    int depth_;
};

}  // namespace eigendrift
