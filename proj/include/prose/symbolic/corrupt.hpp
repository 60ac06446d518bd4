#pragma once

#include "prose/rng.hpp"
#include "prose/symbolic/expr.hpp"

namespace prose::symbolic {

/// Symbolic-input corruption knobs (the experiment-setting table rows).
struct CorruptionConfig {
    bool unknown_coefficients = false;
    double deletion_prob = 0.0;  // per component
    double addition_prob = 0.0;  // per component

    bool any() const { return unknown_coefficients || deletion_prob > 0.0 || addition_prob > 0.0; }
};

/// Applies, per component and in this order: term deletion (never empties a
/// component), term addition from the pool {c·u_i, c·u_i·u_j, c·u_i^2,
/// c·sin(u_i), c·cos(u_i)} with c ~ U[-1, 1] inserted at a uniform position,
/// then placeholder replacement of every coefficient constant (pow exponents
/// are structure, not coefficients, and are kept).
///
/// Throws NotInAdditiveForm when deletion/addition is requested on a system
/// that is not a sum of simple terms.
SystemExpr corrupt(const SystemExpr &sys, const CorruptionConfig &cfg, Rng &rng);

/// Replaces coefficient constants with placeholders; structure is unchanged.
Expr mask_coefficients(const Expr &e);

/// Draws one term from the addition pool for a d-dimensional system.
Expr sample_pool_term(std::size_t dim, Rng &rng);

/// Monte-Carlo relative L2 discrepancy between two velocity maps:
/// mean over sampled points u ~ U[-box, box]^d of |f(u) - f_hat(u)| / |f(u)|.
/// Points where either side raises DomainError or |f(u)| = 0 are redrawn up
/// to 10 times and then skipped. Returns NaN when every point was skipped.
/// Throws DimensionMismatch when the dimensions differ.
double expression_error(const SystemExpr &f, const SystemExpr &f_hat, Rng &rng, int n_points = 50,
                        double box = 5.0);

}  // namespace prose::symbolic
