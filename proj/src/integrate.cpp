#include "prose/integrate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "prose/errors.hpp"

namespace prose::integrate {

namespace {

constexpr int kMaxOrder = 5;
constexpr int kNewtonMaxIter = 4;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;

double rms_norm(const Vector &x) { return x.size() == 0 ? 0.0 : x.norm() / std::sqrt(static_cast<double>(x.size())); }

Vector nan_vector(Eigen::Index n) { return Vector::Constant(n, std::numeric_limits<double>::quiet_NaN()); }

/// Evaluates f and maps DomainError to a NaN state so the step controller
/// can back off instead of aborting.
Vector safe_eval(const Rhs &f, const Vector &u) {
    try {
        return f(u);
    } catch (const DomainError &) {
        return nan_vector(u.size());
    }
}

Matrix compute_r(int order, double factor) {
    Matrix m = Matrix::Zero(order + 1, order + 1);
    m.row(0).setOnes();
    for (int i = 1; i <= order; ++i)
        for (int j = 1; j <= order; ++j) m(i, j) = (i - 1 - factor * j) / i;
    for (int i = 1; i <= order; ++i) m.row(i) = m.row(i).cwiseProduct(m.row(i - 1));
    return m;
}

/// Rescales the difference array for a step-size change by `factor`.
void change_d(Matrix &d, int order, double factor) {
    const Matrix ru = compute_r(order, factor) * compute_r(order, 1.0);
    d.topRows(order + 1) = (ru.transpose() * d.topRows(order + 1)).eval();
}

struct NewtonResult {
    bool converged = false;
    int iterations = 0;
    Vector y;
    Vector d;
};

NewtonResult solve_bdf_system(const Rhs &f, const Vector &y_predict, double c, const Vector &psi,
                              const Eigen::PartialPivLU<Matrix> &lu, const Vector &scale, double tol) {
    NewtonResult r;
    r.y = y_predict;
    r.d = Vector::Zero(y_predict.size());
    double dy_norm_old = -1.0;
    int k = 0;
    for (; k < kNewtonMaxIter; ++k) {
        const Vector fy = safe_eval(f, r.y);
        if (!fy.allFinite()) break;
        const Vector dy = lu.solve(c * fy - psi - r.d);
        const double dy_norm = rms_norm(dy.cwiseQuotient(scale));
        const double rate = dy_norm_old < 0.0 ? -1.0 : dy_norm / dy_norm_old;
        if (rate >= 0.0 && (rate >= 1.0 || std::pow(rate, kNewtonMaxIter - k) / (1.0 - rate) * dy_norm > tol)) break;
        r.y += dy;
        r.d += dy;
        if (dy_norm == 0.0 || (rate >= 0.0 && rate / (1.0 - rate) * dy_norm < tol)) {
            r.converged = true;
            break;
        }
        dy_norm_old = dy_norm;
    }
    r.iterations = k + 1;
    return r;
}

double select_initial_step(const Rhs &f, const Vector &y0, const Vector &f0, double rtol, double atol) {
    const Vector scale = (atol + (y0.array().abs() * rtol)).matrix();
    const double d0 = rms_norm(y0.cwiseQuotient(scale));
    const double d1 = rms_norm(f0.cwiseQuotient(scale));
    const double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    const Vector y1 = y0 + h0 * f0;
    const Vector f1 = safe_eval(f, y1);
    if (!f1.allFinite()) return h0;
    const double d2 = rms_norm((f1 - f0).cwiseQuotient(scale)) / h0;
    const double h1 = (d1 <= 1e-15 && d2 <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.5);
    return std::min(100.0 * h0, h1);
}

/// Interpolating polynomial of the last accepted step.
Vector dense_eval(const Matrix &d, int order, double t_new, double h, double t) {
    Vector y = d.row(0).transpose();
    double p = 1.0;
    for (int j = 0; j < order; ++j) {
        const double shift = t_new - h * j;
        p *= (t - shift) / (h * (1 + j));
        y += p * d.row(j + 1).transpose();
    }
    return y;
}

}  // namespace

Rhs make_rhs(const symbolic::SystemExpr &sys) {
    return [&sys](const Vector &u) {
        const auto v = symbolic::evaluate(sys, std::span<const double>(u.data(), static_cast<std::size_t>(u.size())));
        return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
}

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = a;
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    out.back() = b;
    return out;
}

Matrix jacobian_fd(const Rhs &f, const Vector &u, double eps) {
    const auto n = u.size();
    Matrix j(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double h = eps * std::max(1.0, std::fabs(u[k]));
        Vector up = u, um = u;
        up[k] += h;
        um[k] -= h;
        j.col(k) = (f(up) - f(um)) / (up[k] - um[k]);
    }
    return j;
}

Matrix jacobian_fd(const symbolic::SystemExpr &sys, std::span<const double> u, double eps) {
    const Vector v = Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
    return jacobian_fd(make_rhs(sys), v, eps);
}

Trajectory solve(const Rhs &f, const Vector &u0, std::span<const double> t_grid, const SolverConfig &cfg) {
    if (t_grid.empty()) throw Error("empty time grid");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw Error("time grid must be strictly increasing");
    if (cfg.abs_tol <= 0 || cfg.rel_tol <= 0) throw Error("tolerances must be positive");
    if (cfg.max_order < 1 || cfg.max_order > kMaxOrder) throw Error("max order must be in 1..5");

    const auto n = u0.size();
    Trajectory out;
    out.times.assign(t_grid.begin(), t_grid.end());
    out.values.resize(static_cast<Eigen::Index>(t_grid.size()), n);
    out.values.row(0) = u0.transpose();
    if (!u0.allFinite()) throw NonFiniteState(t_grid[0]);
    if (t_grid.size() == 1) return out;

    const double rtol = cfg.rel_tol, atol = cfg.abs_tol;
    const double t_bound = t_grid.back();
    const double max_step = cfg.max_step > 0 ? cfg.max_step : std::numeric_limits<double>::infinity();
    const int max_order = cfg.max_order;

    std::array<double, kMaxOrder + 2> gamma{}, alpha{}, error_const{};
    for (int k = 1; k <= kMaxOrder + 1; ++k) gamma[k] = gamma[k - 1] + 1.0 / k;
    for (int k = 0; k <= kMaxOrder + 1; ++k) {
        alpha[k] = gamma[k];
        error_const[k] = 1.0 / (k + 1);
    }
    const double newton_tol =
        std::max(10.0 * std::numeric_limits<double>::epsilon() / rtol, std::min(0.03, std::sqrt(rtol)));

    double t = t_grid[0];
    Vector y = u0;
    Vector f0 = safe_eval(f, y);
    if (!f0.allFinite()) throw NonFiniteState(t);
    double h_abs = cfg.first_step > 0 ? cfg.first_step : select_initial_step(f, y, f0, rtol, atol);
    h_abs = std::min(h_abs, max_step);

    Matrix d = Matrix::Zero(kMaxOrder + 3, n);
    d.row(0) = y.transpose();
    d.row(1) = (f0 * h_abs).transpose();
    int order = 1;
    int n_equal_steps = 0;
    Matrix jac = jacobian_fd(f, y, cfg.jacobian_eps);
    bool have_lu = false;
    Eigen::PartialPivLU<Matrix> lu;
    const Matrix eye = Matrix::Identity(n, n);

    std::size_t next_out = 1;
    long steps = 0;
    while (t < t_bound) {
        if (++steps > cfg.max_steps) throw MaxStepsExceeded(t);
        const double min_step = 10.0 * std::fabs(std::nextafter(t, std::numeric_limits<double>::infinity()) - t);
        if (h_abs > max_step) {
            change_d(d, order, max_step / h_abs);
            h_abs = max_step;
            n_equal_steps = 0;
        } else if (h_abs < min_step) {
            change_d(d, order, min_step / h_abs);
            h_abs = min_step;
            n_equal_steps = 0;
        }

        bool current_jac = false;
        bool accepted = false;
        double t_new = t, error_norm = 0.0;
        NewtonResult nr;
        Vector scale;
        int n_iter = 0;
        while (!accepted) {
            if (h_abs < min_step) throw StepSizeUnderflow(t);
            t_new = t + h_abs;
            if (t_new > t_bound) {
                t_new = t_bound;
                change_d(d, order, std::fabs(t_new - t) / h_abs);
                n_equal_steps = 0;
                have_lu = false;
            }
            const double h = t_new - t;
            h_abs = std::fabs(h);

            const Vector y_predict = d.topRows(order + 1).colwise().sum().transpose();
            scale = (atol + rtol * y_predict.array().abs()).matrix();
            Vector psi = Vector::Zero(n);
            for (int j = 1; j <= order; ++j) psi += gamma[j] * d.row(j).transpose();
            psi /= alpha[order];
            const double c = h / alpha[order];

            bool converged = false;
            while (!converged) {
                if (!have_lu) {
                    lu.compute(eye - c * jac);
                    have_lu = true;
                }
                nr = solve_bdf_system(f, y_predict, c, psi, lu, scale, newton_tol);
                converged = nr.converged;
                n_iter = nr.iterations;
                if (!converged) {
                    if (current_jac) break;
                    const Vector fp = safe_eval(f, y_predict);
                    if (!fp.allFinite()) break;
                    jac = jacobian_fd(f, y_predict, cfg.jacobian_eps);
                    have_lu = false;
                    current_jac = true;
                }
            }
            if (!converged) {
                h_abs *= 0.5;
                change_d(d, order, 0.5);
                n_equal_steps = 0;
                have_lu = false;
                continue;
            }

            const double safety = 0.9 * (2 * kNewtonMaxIter + 1) / (2 * kNewtonMaxIter + n_iter);
            scale = (atol + rtol * nr.y.array().abs()).matrix();
            error_norm = rms_norm((error_const[order] * nr.d).cwiseQuotient(scale));
            if (!std::isfinite(error_norm) || error_norm > 1.0) {
                const double factor =
                    std::isfinite(error_norm) ? std::max(kMinFactor, safety * std::pow(error_norm, -1.0 / (order + 1)))
                                              : kMinFactor;
                h_abs *= factor;
                change_d(d, order, factor);
                n_equal_steps = 0;
            } else {
                accepted = true;
            }
        }

        if (!nr.y.allFinite()) throw NonFiniteState(t);
        const double t_old = t;
        const double h = t_new - t_old;
        ++n_equal_steps;
        t = t_new;
        y = nr.y;

        d.row(order + 2) = nr.d.transpose() - d.row(order + 1);
        d.row(order + 1) = nr.d.transpose();
        for (int i = order; i >= 0; --i) d.row(i) += d.row(i + 1);

        while (next_out < t_grid.size() && t_grid[next_out] <= t) {
            const double tq = t_grid[next_out];
            out.values.row(static_cast<Eigen::Index>(next_out)) =
                (tq == t ? y : dense_eval(d, order, t, h, tq)).transpose();
            ++next_out;
        }

        if (n_equal_steps < order + 1) continue;

        const double safety = 0.9 * (2 * kNewtonMaxIter + 1) / (2 * kNewtonMaxIter + n_iter);
        const double inf = std::numeric_limits<double>::infinity();
        const double error_m_norm =
            order > 1 ? rms_norm((error_const[order - 1] * d.row(order).transpose()).cwiseQuotient(scale)) : inf;
        const double error_p_norm =
            order < max_order ? rms_norm((error_const[order + 1] * d.row(order + 2).transpose()).cwiseQuotient(scale))
                              : inf;
        const std::array<double, 3> norms = {error_m_norm, error_norm, error_p_norm};
        std::array<double, 3> factors{};
        for (int i = 0; i < 3; ++i) {
            const double e = norms[static_cast<std::size_t>(i)];
            factors[static_cast<std::size_t>(i)] = e == 0.0 ? inf : std::pow(e, -1.0 / (order + i));
        }
        const auto best = std::max_element(factors.begin(), factors.end());
        order += static_cast<int>(best - factors.begin()) - 1;
        const double factor = std::min(kMaxFactor, safety * *best);
        h_abs *= factor;
        change_d(d, order, factor);
        n_equal_steps = 0;
        have_lu = false;
    }
    if (!out.values.allFinite()) throw NonFiniteState(t);
    return out;
}

Trajectory solve(const symbolic::SystemExpr &sys, std::span<const double> u0, std::span<const double> t_grid,
                 const SolverConfig &cfg) {
    if (u0.size() != sys.dim()) throw DimensionMismatch("initial condition dimension");
    const Vector v = Eigen::Map<const Vector>(u0.data(), static_cast<Eigen::Index>(u0.size()));
    return solve(make_rhs(sys), v, t_grid, cfg);
}

Vector bdf_fixed_step(const Rhs &f, const std::vector<Vector> &history, double h, int steps, int order,
                      double newton_tol) {
    // sum_{j=0..k} a_j y_{n+1-j} = h b f(y_{n+1}), classical BDF-k coefficients
    static const std::array<std::vector<double>, 6> kA = {{
        {},
        {1.0, -1.0},
        {1.0, -4.0 / 3.0, 1.0 / 3.0},
        {1.0, -18.0 / 11.0, 9.0 / 11.0, -2.0 / 11.0},
        {1.0, -48.0 / 25.0, 36.0 / 25.0, -16.0 / 25.0, 3.0 / 25.0},
        {1.0, -300.0 / 137.0, 300.0 / 137.0, -200.0 / 137.0, 75.0 / 137.0, -12.0 / 137.0},
    }};
    static constexpr std::array<double, 6> kB = {0.0, 1.0, 2.0 / 3.0, 6.0 / 11.0, 12.0 / 25.0, 60.0 / 137.0};
    if (order < 1 || order > kMaxOrder) throw Error("order must be in 1..5");
    if (static_cast<int>(history.size()) != order) throw Error("history length must equal the order");

    std::vector<Vector> hist = history;  // oldest first
    const auto n = hist.front().size();
    const Matrix eye = Matrix::Identity(n, n);
    for (int s = 0; s < steps; ++s) {
        Vector rhs_const = Vector::Zero(n);
        for (int j = 1; j <= order; ++j) rhs_const -= kA[order][j] * hist[hist.size() - j];
        Vector y = hist.back();
        const double hb = h * kB[order];
        for (int it = 0; it < 50; ++it) {
            const Vector g = y - hb * f(y) - rhs_const;
            const Matrix jg = eye - hb * jacobian_fd(f, y);
            const Vector dy = jg.partialPivLu().solve(-g);
            y += dy;
            if (dy.norm() <= newton_tol * std::max(1.0, y.norm())) break;
        }
        hist.erase(hist.begin());
        hist.push_back(y);
    }
    return hist.back();
}

}  // namespace prose::integrate
