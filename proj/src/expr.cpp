#include "eigendrift/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>

namespace eigendrift {

namespace {

struct FuncDef {
    const char* name;
    int arity;
    OpCode op;
};

constexpr FuncDef kFuncs[] = {
    {"sin", 1, OpCode::Sin},   {"cos", 1, OpCode::Cos},
    {"exp", 1, OpCode::Exp},   {"log", 1, OpCode::Log},
    {"sqrt", 1, OpCode::Sqrt}, {"tanh", 1, OpCode::Tanh},
    {"abs", 1, OpCode::Abs},   {"sign", 1, OpCode::Sign},
    {"min", 2, OpCode::Min},   {"max", 2, OpCode::Max},
};

int func_index(std::string_view name) {
    for (int i = 0; i < static_cast<int>(std::size(kFuncs)); ++i)
        if (name == kFuncs[i].name) return i;
    return -1;
}

double sign_of(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

// ---------------- parser ----------------

class Parser {
  public:
    explicit Parser(std::string_view text) : text_(text) {}

    AstNode run() {
        AstNode e = expr();
        skip_ws();
        if (pos_ != text_.size()) throw SyntaxError(pos_, "end of input");
        return e;
    }

  private:
    std::string_view text_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    bool accept(char c) {
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c, const char* what) {
        if (!accept(c)) throw SyntaxError(pos_, what);
    }

    AstNode expr() {
        AstNode lhs = term();
        for (;;) {
            char c = peek();
            if (c != '+' && c != '-') return lhs;
            ++pos_;
            AstNode n;
            n.kind = AstNode::Kind::Binary;
            n.op = c;
            n.args.push_back(std::move(lhs));
            n.args.push_back(term());
            lhs = std::move(n);
        }
    }

    AstNode term() {
        AstNode lhs = factor();
        for (;;) {
            char c = peek();
            if (c != '*' && c != '/') return lhs;
            ++pos_;
            AstNode n;
            n.kind = AstNode::Kind::Binary;
            n.op = c;
            n.args.push_back(std::move(lhs));
            n.args.push_back(factor());
            lhs = std::move(n);
        }
    }

    AstNode factor() {
        if (accept('-')) {
            AstNode n;
            n.kind = AstNode::Kind::Unary;
            n.op = '-';
            n.args.push_back(factor());
            return n;
        }
        return power();
    }

    AstNode power() {
        AstNode base = atom();
        if (accept('^')) {
            AstNode n;
            n.kind = AstNode::Kind::Binary;
            n.op = '^';
            n.args.push_back(std::move(base));
            n.args.push_back(factor());  // right-associative
            return n;
        }
        return base;
    }

    AstNode atom() {
        char c = peek();
        if (c == '(') {
            ++pos_;
            AstNode e = expr();
            expect(')', "')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
            return identifier();
        throw SyntaxError(pos_, "number, identifier, or '('");
    }

    AstNode number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               std::isdigit(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() &&
                   std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
        }
        if (pos_ == start ||
            (pos_ == start + 1 && text_[start] == '.'))
            throw SyntaxError(start, "number");
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t mark = pos_++;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-'))
                ++pos_;
            std::size_t dig = pos_;
            while (pos_ < text_.size() &&
                   std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            if (pos_ == dig) pos_ = mark;  // 'e' was not an exponent; reject below
        }
        std::string tok(text_.substr(start, pos_ - start));
        AstNode n;
        n.kind = AstNode::Kind::Constant;
        n.value = std::strtod(tok.c_str(), nullptr);
        return n;
    }

    AstNode identifier() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                text_[pos_] == '_'))
            ++pos_;
        std::string name(text_.substr(start, pos_ - start));
        if (peek() == '(') {
            ++pos_;
            int fi = func_index(name);
            if (fi < 0) throw UnknownIdentifier(name);
            AstNode n;
            n.kind = AstNode::Kind::Call;
            n.func = fi;
            n.args.push_back(expr());
            while (accept(',')) n.args.push_back(expr());
            expect(')', "')'");
            int want = kFuncs[fi].arity;
            if (static_cast<int>(n.args.size()) != want)
                throw ArityError(name, static_cast<int>(n.args.size()), want);
            return n;
        }
        AstNode n;
        n.kind = AstNode::Kind::Variable;
        if (name == "x1" || name == "x")
            n.var = Var::X1;
        else if (name == "x2")
            n.var = Var::X2;
        else if (name == "u")
            n.var = Var::U;
        else
            throw UnknownIdentifier(name);
        return n;
    }
};

// ---------------- serializer ----------------

// Precedence levels used for minimal-parenthesis printing:
//   1 add/sub, 2 mul/div, 3 unary minus, 4 pow, 5 atom.
int level(const AstNode& n) {
    switch (n.kind) {
        case AstNode::Kind::Binary:
            if (n.op == '+' || n.op == '-') return 1;
            if (n.op == '*' || n.op == '/') return 2;
            return 4;  // '^'
        case AstNode::Kind::Unary:
            return 3;
        default:
            return 5;
    }
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void print(const AstNode& n, int min_level, std::string& out) {
    bool paren = level(n) < min_level;
    if (paren) out += '(';
    switch (n.kind) {
        case AstNode::Kind::Constant:
            out += format_number(n.value);
            break;
        case AstNode::Kind::Variable:
            out += var_name(n.var);
            break;
        case AstNode::Kind::Unary:
            out += '-';
            print(n.args[0], 3, out);
            break;
        case AstNode::Kind::Binary:
            if (n.op == '+' || n.op == '-') {
                print(n.args[0], 1, out);
                out += n.op;
                print(n.args[1], 2, out);
            } else if (n.op == '*' || n.op == '/') {
                print(n.args[0], 2, out);
                out += n.op;
                print(n.args[1], 3, out);
            } else {  // '^': base must be an atom, exponent a factor
                print(n.args[0], 5, out);
                out += '^';
                print(n.args[1], 3, out);
            }
            break;
        case AstNode::Kind::Call:
            out += kFuncs[n.func].name;
            out += '(';
            for (std::size_t i = 0; i < n.args.size(); ++i) {
                if (i) out += ',';
                print(n.args[i], 1, out);
            }
            out += ')';
            break;
    }
    if (paren) out += ')';
}

// ---------------- compiler ----------------

void compile(const AstNode& n, std::vector<Instr>& prog, std::uint8_t& vars) {
    switch (n.kind) {
        case AstNode::Kind::Constant:
            prog.push_back({OpCode::Const, n.value});
            break;
        case AstNode::Kind::Variable: {
            OpCode op = n.var == Var::X1   ? OpCode::LoadX1
                        : n.var == Var::X2 ? OpCode::LoadX2
                                           : OpCode::LoadU;
            vars |= std::uint8_t(1u << static_cast<int>(n.var));
            prog.push_back({op});
            break;
        }
        case AstNode::Kind::Unary:
            compile(n.args[0], prog, vars);
            prog.push_back({OpCode::Neg});
            break;
        case AstNode::Kind::Binary: {
            if (n.op == '^' && n.args[1].kind == AstNode::Kind::Constant &&
                n.args[1].value == std::floor(n.args[1].value) &&
                std::abs(n.args[1].value) <= 16) {
                compile(n.args[0], prog, vars);
                prog.push_back({OpCode::PowInt, n.args[1].value});
                break;
            }
            compile(n.args[0], prog, vars);
            compile(n.args[1], prog, vars);
            OpCode op;
            switch (n.op) {
                case '+': op = OpCode::Add; break;
                case '-': op = OpCode::Sub; break;
                case '*': op = OpCode::Mul; break;
                case '/': op = OpCode::Div; break;
                default:  op = OpCode::Pow; break;
            }
            prog.push_back({op});
            break;
        }
        case AstNode::Kind::Call:
            for (const auto& a : n.args) compile(a, prog, vars);
            prog.push_back({kFuncs[n.func].op});
            break;
    }
}

int program_depth(const std::vector<Instr>& prog) {
    int depth = 0, max_depth = 0;
    for (const Instr& in : prog) {
        switch (in.op) {
            case OpCode::Const:
            case OpCode::LoadX1:
            case OpCode::LoadX2:
            case OpCode::LoadU:
                ++depth;
                break;
            case OpCode::Add:
            case OpCode::Sub:
            case OpCode::Mul:
            case OpCode::Div:
            case OpCode::Pow:
            case OpCode::Min:
            case OpCode::Max:
                --depth;
                break;
            default:
                break;  // unary: no net change
        }
        if (depth > max_depth) max_depth = depth;
    }
    return max_depth;
}

double ipow(double x, int k) {
    if (k < 0) return 1.0 / ipow(x, -k);
    double r = 1.0;
    while (k) {
        if (k & 1) r *= x;
        x *= x;
        k >>= 1;
    }
    return r;
}

}  // namespace

const char* var_name(Var v) {
    switch (v) {
        case Var::X1: return "x1";
        case Var::X2: return "x2";
        default: return "u";
    }
}

bool AstNode::operator==(const AstNode& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
        case Kind::Constant: return value == o.value;
        case Kind::Variable: return var == o.var;
        case Kind::Unary: return args[0] == o.args[0];
        case Kind::Binary:
            return op == o.op && args[0] == o.args[0] && args[1] == o.args[1];
        case Kind::Call:
            if (func != o.func || args.size() != o.args.size()) return false;
            for (std::size_t i = 0; i < args.size(); ++i)
                if (!(args[i] == o.args[i])) return false;
            return true;
    }
    return false;
}

Expression Expression::parse(std::string_view text) {
    Expression e;
    e.root_ = std::make_shared<AstNode>(Parser(text).run());
    e.finish();
    return e;
}

Expression Expression::constant(double c) {
    Expression e;
    AstNode n;
    n.kind = AstNode::Kind::Constant;
    n.value = c;
    e.root_ = std::make_shared<AstNode>(std::move(n));
    e.finish();
    return e;
}

void Expression::finish() {
    compile(*root_, program_, free_vars_);
    stack_depth_ = program_depth(program_);
}

std::string Expression::serialize() const {
    std::string out;
    print(*root_, 1, out);
    return out;
}

double Expression::evaluate(const Bindings& b) const {
    double stack[32];
    int sp = 0;
    for (const Instr& in : program_) {
        switch (in.op) {
            case OpCode::Const: stack[sp++] = in.value; break;
            case OpCode::LoadX1:
                if (!b.x1) throw UnboundVariable("x1");
                stack[sp++] = *b.x1;
                break;
            case OpCode::LoadX2:
                if (!b.x2) throw UnboundVariable("x2");
                stack[sp++] = *b.x2;
                break;
            case OpCode::LoadU:
                if (!b.u) throw UnboundVariable("u");
                stack[sp++] = *b.u;
                break;
            case OpCode::Add: --sp; stack[sp - 1] += stack[sp]; break;
            case OpCode::Sub: --sp; stack[sp - 1] -= stack[sp]; break;
            case OpCode::Mul: --sp; stack[sp - 1] *= stack[sp]; break;
            case OpCode::Div:
                --sp;
                if (stack[sp] == 0.0) throw DomainError("/", 0.0);
                stack[sp - 1] /= stack[sp];
                break;
            case OpCode::Neg: stack[sp - 1] = -stack[sp - 1]; break;
            case OpCode::Pow: {
                --sp;
                double r = std::pow(stack[sp - 1], stack[sp]);
                if (!std::isfinite(r) && std::isfinite(stack[sp - 1]) &&
                    std::isfinite(stack[sp]))
                    throw DomainError("^", stack[sp - 1]);
                stack[sp - 1] = r;
                break;
            }
            case OpCode::PowInt:
                if (in.value < 0 && stack[sp - 1] == 0.0)
                    throw DomainError("^", 0.0);
                stack[sp - 1] = ipow(stack[sp - 1],
                                     static_cast<int>(in.value));
                break;
            case OpCode::Sin: stack[sp - 1] = std::sin(stack[sp - 1]); break;
            case OpCode::Cos: stack[sp - 1] = std::cos(stack[sp - 1]); break;
            case OpCode::Exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
            case OpCode::Log:
                if (stack[sp - 1] <= 0.0)
                    throw DomainError("log", stack[sp - 1]);
                stack[sp - 1] = std::log(stack[sp - 1]);
                break;
            case OpCode::Sqrt:
                if (stack[sp - 1] < 0.0)
                    throw DomainError("sqrt", stack[sp - 1]);
                stack[sp - 1] = std::sqrt(stack[sp - 1]);
                break;
            case OpCode::Tanh: stack[sp - 1] = std::tanh(stack[sp - 1]); break;
            case OpCode::Abs: stack[sp - 1] = std::abs(stack[sp - 1]); break;
            case OpCode::Sign: stack[sp - 1] = sign_of(stack[sp - 1]); break;
            case OpCode::Min:
                --sp;
                stack[sp - 1] = std::min(stack[sp - 1], stack[sp]);
                break;
            case OpCode::Max:
                --sp;
                stack[sp - 1] = std::max(stack[sp - 1], stack[sp]);
                break;
        }
    }
    return stack[0];
}

BatchEval::BatchEval(const Expression& e)
    : program_(e.program()), depth_(e.stack_depth()) {
    if (depth_ > 16) throw Error("expression too deep for batch evaluation");
}

void BatchEval::operator()(int n, const double* x1, const double* x2,
                           const double* u, double* out) const {
    double stack[16][kBatch];
    int sp = 0;
    for (const Instr& in : program_) {
        double* top = stack[sp > 0 ? sp - 1 : 0];
        switch (in.op) {
            case OpCode::Const: {
                double* t = stack[sp++];
                for (int i = 0; i < n; ++i) t[i] = in.value;
                break;
            }
            case OpCode::LoadX1: {
                double* t = stack[sp++];
                for (int i = 0; i < n; ++i) t[i] = x1[i];
                break;
            }
            case OpCode::LoadX2: {
                double* t = stack[sp++];
                for (int i = 0; i < n; ++i) t[i] = x2[i];
                break;
            }
            case OpCode::LoadU: {
                double* t = stack[sp++];
                for (int i = 0; i < n; ++i) t[i] = u[i];
                break;
            }
            case OpCode::Add: {
                double* a = stack[sp - 2];
                for (int i = 0; i < n; ++i) a[i] += top[i];
                --sp;
                break;
            }
            case OpCode::Sub: {
                double* a = stack[sp - 2];
                for (int i = 0; i < n; ++i) a[i] -= top[i];
                --sp;
                break;
            }
            case OpCode::Mul: {
                double* a = stack[sp - 2];
                for (int i = 0; i < n; ++i) a[i] *= top[i];
                --sp;
                break;
            }
            case OpCode::Div: {
                double* a = stack[sp - 2];
                for (int i = 0; i < n; ++i) a[i] /= top[i];
                --sp;
                break;
            }
            case OpCode::Neg:
                for (int i = 0; i < n; ++i) top[i] = -top[i];
                break;
            case OpCode::Pow: {
                double* a = stack[sp - 2];
                for (int i = 0; i < n; ++i) a[i] = std::pow(a[i], top[i]);
                --sp;
                break;
            }
            case OpCode::PowInt: {
                int k = static_cast<int>(in.value);
                if (k == 2) {
                    for (int i = 0; i < n; ++i) top[i] *= top[i];
                } else {
                    for (int i = 0; i < n; ++i) top[i] = ipow(top[i], k);
                }
                break;
            }
            case OpCode::Sin:
                for (int i = 0; i < n; ++i) top[i] = std::sin(top[i]);
                break;
            case OpCode::Cos:
                for (int i = 0; i < n; ++i) top[i] = std::cos(top[i]);
                break;
            case OpCode::Exp:
                for (int i = 0; i < n; ++i) top[i] = std::exp(top[i]);
                break;
            case OpCode::Log:
                for (int i = 0; i < n; ++i) top[i] = std::log(top[i]);
                break;
            case OpCode::Sqrt:
                for (int i = 0; i < n; ++i) top[i] = std::sqrt(top[i]);
                break;
            case OpCode::Tanh:
                for (int i = 0; i < n; ++i) top[i] = std::tanh(top[i]);
                break;
            case OpCode::Abs:
                for (int i = 0; i < n; ++i) top[i] = std::abs(top[i]);
                break;
            case OpCode::Sign:
                for (int i = 0; i < n; ++i) top[i] = sign_of(top[i]);
                break;
            case OpCode::Min: {
                double* a = stack[sp - 2];
                for (int i = 0; i < n; ++i) a[i] = std::min(a[i], top[i]);
                --sp;
                break;
            }
            case OpCode::Max: {
                double* a = stack[sp - 2];
                for (int i = 0; i < n; ++i) a[i] = std::max(a[i], top[i]);
                --sp;
                break;
            }
        }
    }
    std::memcpy(out, stack[0], sizeof(double) * n);
}

}  // namespace eigendrift
