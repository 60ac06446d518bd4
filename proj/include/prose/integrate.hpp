#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "prose/symbolic/expr.hpp"

namespace prose::integrate {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Right-hand side u' = f(u) of an autonomous system.
using Rhs = std::function<Vector(const Vector &)>;

Rhs make_rhs(const symbolic::SystemExpr &sys);

struct SolverConfig {
    double abs_tol = 1e-6;
    double rel_tol = 1e-5;
    int max_order = 5;
    double first_step = 0.0;  // 0 selects the step automatically
    double max_step = 0.0;    // 0 means unbounded
    long max_steps = 200000;
    double jacobian_eps = 1e-6;
};

/// Samples of a solution on a strictly increasing grid; values is
/// (grid length x d), row i holding u(times[i]).
struct Trajectory {
    std::vector<double> times;
    Matrix values;

    std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

/// Variable-order (1..max_order), variable-step BDF in modified-divided-
/// difference form with a Newton corrector on a finite-difference Jacobian.
/// The solution is interpolated onto t_grid with the BDF dense output;
/// t_grid[0] is the initial time.
///
/// Throws StepSizeUnderflow, NonFiniteState or MaxStepsExceeded; each carries
/// the last time at which the state was valid.
Trajectory solve(const Rhs &f, const Vector &u0, std::span<const double> t_grid, const SolverConfig &cfg = {});
Trajectory solve(const symbolic::SystemExpr &sys, std::span<const double> u0, std::span<const double> t_grid,
                 const SolverConfig &cfg = {});

/// Central-difference Jacobian with per-coordinate step eps·max(1, |u_j|).
Matrix jacobian_fd(const Rhs &f, const Vector &u, double eps = 1e-6);
Matrix jacobian_fd(const symbolic::SystemExpr &sys, std::span<const double> u, double eps = 1e-6);

/// Fixed-step, fixed-order BDF-k with classical coefficients: `history` holds
/// the k starting values u(t0), ..., u(t0 + (k-1)h); advances `steps` steps
/// past the last one and returns the final state. Used to measure the
/// convergence order of the corrector.
Vector bdf_fixed_step(const Rhs &f, const std::vector<Vector> &history, double h, int steps, int order,
                      double newton_tol = 1e-12);

/// Uniform grid of n points from a to b inclusive.
std::vector<double> linspace(double a, double b, std::size_t n);

}  // namespace prose::integrate
