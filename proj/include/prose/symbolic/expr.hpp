#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace prose::symbolic {

enum class Op : std::uint8_t {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Sin,
    Cos,
    Neg,
    Const,
    Var,
    Placeholder,
};

int arity(Op op);
bool is_leaf(Op op);
const char *op_name(Op op);

/// Expression tree node with value semantics. `value` is meaningful for
/// Const, `var` for Var; children.size() == arity(op).
struct Expr {
    Op op = Op::Const;
    double value = 0.0;
    int var = 0;
    std::vector<Expr> children;

    bool operator==(const Expr &) const = default;

    std::size_t size() const;  // node count
    bool contains(Op kind) const;
    bool depends_on_variables() const;
};

// Builders.
Expr c(double value);
Expr u(int index);  // zero-based variable index
Expr placeholder();
Expr add(Expr a, Expr b);
Expr sub(Expr a, Expr b);
Expr mul(Expr a, Expr b);
Expr div(Expr a, Expr b);
Expr pow(Expr base, Expr exponent);
Expr sin(Expr a);
Expr cos(Expr a);
Expr neg(Expr a);

/// Product of factors, right-associated: a*(b*c).
Expr product(std::vector<Expr> factors);
/// Sum of terms, right-associated so that 1+2+3 is add 1 add 2 3.
Expr sum(std::vector<Expr> terms);
/// Inverse of sum(): flattens the top-level add chain.
std::vector<Expr> terms_of(const Expr &e);

/// A d-dimensional right-hand side: one tree per component.
struct SystemExpr {
    std::vector<Expr> components;

    std::size_t dim() const { return components.size(); }
    bool operator==(const SystemExpr &) const = default;
};

inline constexpr std::size_t kMaxDim = 5;

/// Checks the structural invariants (arity, variable range, finite
/// constants, 1 <= d <= kMaxDim). Throws InvalidExpression.
void validate(const SystemExpr &sys);

double evaluate(const Expr &e, std::span<const double> point);

/// Componentwise evaluation. Throws DomainError on division by zero or any
/// non-finite intermediate, PlaceholderPresent on placeholder leaves and
/// DimensionMismatch when point.size() != dim.
std::vector<double> evaluate(const SystemExpr &sys, std::span<const double> point);

/// Each component is a sum of terms none of which divides by a
/// variable-dependent quantity.
bool is_additive_form(const SystemExpr &sys);

/// Human-readable infix, one string per component ("-0.327*u1 - u2 ...").
std::vector<std::string> to_infix(const SystemExpr &sys);
std::string to_infix(const Expr &e);

}  // namespace prose::symbolic
