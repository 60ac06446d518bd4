#pragma once

#include <cmath>

#include "prose/symbolic/expr.hpp"

namespace prose::testing {

/// Structural equality with constants compared to a relative tolerance.
inline bool approx_equal(const symbolic::Expr &a, const symbolic::Expr &b, double rel) {
    if (a.op != b.op || a.children.size() != b.children.size()) return false;
    if (a.op == symbolic::Op::Var && a.var != b.var) return false;
    if (a.op == symbolic::Op::Const) {
        const double scale = std::max(std::fabs(a.value), std::fabs(b.value));
        if (std::fabs(a.value - b.value) > rel * scale) return false;
    }
    for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!approx_equal(a.children[i], b.children[i], rel)) return false;
    return true;
}

inline bool approx_equal(const symbolic::SystemExpr &a, const symbolic::SystemExpr &b, double rel) {
    if (a.dim() != b.dim()) return false;
    for (std::size_t i = 0; i < a.dim(); ++i)
        if (!approx_equal(a.components[i], b.components[i], rel)) return false;
    return true;
}

}  // namespace prose::testing
