#include "prose/symbolic/expr.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "prose/errors.hpp"

namespace prose::symbolic {

int arity(Op op) {
    switch (op) {
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
        case Op::Pow:
            return 2;
        case Op::Sin:
        case Op::Cos:
        case Op::Neg:
            return 1;
        case Op::Const:
        case Op::Var:
        case Op::Placeholder:
            return 0;
    }
    return 0;
}

bool is_leaf(Op op) { return arity(op) == 0; }

const char *op_name(Op op) {
    switch (op) {
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Pow: return "pow";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Neg: return "neg";
        case Op::Const: return "const";
        case Op::Var: return "var";
        case Op::Placeholder: return "placeholder";
    }
    return "?";
}

std::size_t Expr::size() const {
    std::size_t n = 1;
    for (const auto &ch : children) n += ch.size();
    return n;
}

bool Expr::contains(Op kind) const {
    if (op == kind) return true;
    for (const auto &ch : children)
        if (ch.contains(kind)) return true;
    return false;
}

bool Expr::depends_on_variables() const { return contains(Op::Var); }

Expr c(double value) { return Expr{Op::Const, value, 0, {}}; }
Expr u(int index) { return Expr{Op::Var, 0.0, index, {}}; }
Expr placeholder() { return Expr{Op::Placeholder, 0.0, 0, {}}; }

namespace {
Expr binary(Op op, Expr a, Expr b) {
    Expr e{op, 0.0, 0, {}};
    e.children.reserve(2);
    e.children.push_back(std::move(a));
    e.children.push_back(std::move(b));
    return e;
}
Expr unary(Op op, Expr a) {
    Expr e{op, 0.0, 0, {}};
    e.children.push_back(std::move(a));
    return e;
}
}  // namespace

Expr add(Expr a, Expr b) { return binary(Op::Add, std::move(a), std::move(b)); }
Expr sub(Expr a, Expr b) { return binary(Op::Sub, std::move(a), std::move(b)); }
Expr mul(Expr a, Expr b) { return binary(Op::Mul, std::move(a), std::move(b)); }
Expr div(Expr a, Expr b) { return binary(Op::Div, std::move(a), std::move(b)); }
Expr pow(Expr base, Expr exponent) { return binary(Op::Pow, std::move(base), std::move(exponent)); }
Expr sin(Expr a) { return unary(Op::Sin, std::move(a)); }
Expr cos(Expr a) { return unary(Op::Cos, std::move(a)); }
Expr neg(Expr a) { return unary(Op::Neg, std::move(a)); }

namespace {
Expr fold_right(std::vector<Expr> items, Op op) {
    if (items.empty()) throw InvalidExpression("empty n-ary chain");
    Expr acc = std::move(items.back());
    for (std::size_t i = items.size() - 1; i-- > 0;) acc = binary(op, std::move(items[i]), std::move(acc));
    return acc;
}
}  // namespace

Expr product(std::vector<Expr> factors) { return fold_right(std::move(factors), Op::Mul); }
Expr sum(std::vector<Expr> terms) { return fold_right(std::move(terms), Op::Add); }

std::vector<Expr> terms_of(const Expr &e) {
    std::vector<Expr> out;
    const Expr *cur = &e;
    while (cur->op == Op::Add) {
        // left operand of a right-associated chain is a term; a left-nested
        // add is flattened as well
        if (cur->children[0].op == Op::Add) {
            auto left = terms_of(cur->children[0]);
            out.insert(out.end(), left.begin(), left.end());
        } else {
            out.push_back(cur->children[0]);
        }
        cur = &cur->children[1];
    }
    out.push_back(*cur);
    return out;
}

namespace {
void validate_node(const Expr &e, std::size_t dim) {
    if (static_cast<int>(e.children.size()) != arity(e.op))
        throw InvalidExpression(std::string("arity violation at ") + op_name(e.op));
    if (e.op == Op::Var && (e.var < 0 || static_cast<std::size_t>(e.var) >= dim))
        throw InvalidExpression("variable index " + std::to_string(e.var) + " out of range");
    if (e.op == Op::Const && !std::isfinite(e.value)) throw InvalidExpression("non-finite constant");
    for (const auto &ch : e.children) validate_node(ch, dim);
}
}  // namespace

void validate(const SystemExpr &sys) {
    if (sys.dim() == 0 || sys.dim() > kMaxDim)
        throw InvalidExpression("dimension " + std::to_string(sys.dim()) + " outside 1.." + std::to_string(kMaxDim));
    for (const auto &comp : sys.components) validate_node(comp, sys.dim());
}

namespace {
double checked(double v) {
    if (!std::isfinite(v)) throw DomainError("non-finite intermediate");
    return v;
}
}  // namespace

double evaluate(const Expr &e, std::span<const double> point) {
    switch (e.op) {
        case Op::Const:
            return e.value;
        case Op::Var:
            if (e.var < 0 || static_cast<std::size_t>(e.var) >= point.size())
                throw DimensionMismatch("variable index exceeds point dimension");
            return point[static_cast<std::size_t>(e.var)];
        case Op::Placeholder:
            throw PlaceholderPresent("cannot evaluate a coefficient placeholder");
        case Op::Sin:
            return checked(std::sin(evaluate(e.children[0], point)));
        case Op::Cos:
            return checked(std::cos(evaluate(e.children[0], point)));
        case Op::Neg:
            return -evaluate(e.children[0], point);
        default:
            break;
    }
    const double a = evaluate(e.children[0], point);
    const double b = evaluate(e.children[1], point);
    switch (e.op) {
        case Op::Add: return checked(a + b);
        case Op::Sub: return checked(a - b);
        case Op::Mul: return checked(a * b);
        case Op::Div:
            if (b == 0.0) throw DomainError("division by zero");
            return checked(a / b);
        case Op::Pow: return checked(std::pow(a, b));
        default: break;
    }
    throw InvalidExpression("unreachable node kind");
}

std::vector<double> evaluate(const SystemExpr &sys, std::span<const double> point) {
    if (point.size() != sys.dim())
        throw DimensionMismatch("point has " + std::to_string(point.size()) + " coordinates, system has " +
                                std::to_string(sys.dim()));
    std::vector<double> out(sys.dim());
    for (std::size_t i = 0; i < sys.dim(); ++i) out[i] = evaluate(sys.components[i], point);
    return out;
}

namespace {
bool has_variable_denominator(const Expr &e) {
    if (e.op == Op::Div && e.children[1].depends_on_variables()) return true;
    for (const auto &ch : e.children)
        if (has_variable_denominator(ch)) return true;
    return false;
}
}  // namespace

bool is_additive_form(const SystemExpr &sys) {
    for (const auto &comp : sys.components)
        for (const auto &term : terms_of(comp))
            if (has_variable_denominator(term)) return false;
    return true;
}

// Infix printing ------------------------------------------------------------

namespace {

int precedence(const Expr &e) {
    switch (e.op) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        case Op::Const: return e.value < 0 ? 3 : 5;
        default: return 5;
    }
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string wrap(const Expr &e, int min_prec) {
    std::string s = to_infix(e);
    return precedence(e) < min_prec ? "(" + s + ")" : s;
}

}  // namespace

std::string to_infix(const Expr &e) {
    switch (e.op) {
        case Op::Const: return format_number(e.value);
        case Op::Var: return "u" + std::to_string(e.var + 1);
        case Op::Placeholder: return "C";
        case Op::Sin: return "sin(" + to_infix(e.children[0]) + ")";
        case Op::Cos: return "cos(" + to_infix(e.children[0]) + ")";
        case Op::Neg: return "-" + wrap(e.children[0], 3);
        case Op::Add: {
            std::string rhs = wrap(e.children[1], 1);
            if (!rhs.empty() && rhs[0] == '-') return wrap(e.children[0], 1) + " - " + rhs.substr(1);
            return wrap(e.children[0], 1) + " + " + rhs;
        }
        case Op::Sub: return wrap(e.children[0], 1) + " - " + wrap(e.children[1], 2);
        case Op::Mul: return wrap(e.children[0], 2) + "*" + wrap(e.children[1], 2);
        case Op::Div: return wrap(e.children[0], 2) + "/" + wrap(e.children[1], 3);
        case Op::Pow: return wrap(e.children[0], 5) + "^" + wrap(e.children[1], 5);
    }
    return "?";
}

std::vector<std::string> to_infix(const SystemExpr &sys) {
    std::vector<std::string> out;
    out.reserve(sys.dim());
    for (const auto &comp : sys.components) out.push_back(to_infix(comp));
    return out;
}

}  // namespace prose::symbolic
