#include "prose/symbolic/corrupt.hpp"

#include <cmath>
#include <limits>

#include "prose/errors.hpp"

namespace prose::symbolic {

Expr mask_coefficients(const Expr &e) {
    if (e.op == Op::Const) return placeholder();
    Expr out{e.op, e.value, e.var, {}};
    out.children.reserve(e.children.size());
    for (std::size_t i = 0; i < e.children.size(); ++i) {
        const bool exponent_slot = e.op == Op::Pow && i == 1;
        out.children.push_back(exponent_slot ? e.children[i] : mask_coefficients(e.children[i]));
    }
    return out;
}

Expr sample_pool_term(std::size_t dim, Rng &rng) {
    const double coef = rng.uniform(-1.0, 1.0);
    const int i = static_cast<int>(rng.index(dim));
    switch (rng.index(5)) {
        case 0: return mul(c(coef), u(i));
        case 1: {
            const int j = static_cast<int>(rng.index(dim));
            return mul(c(coef), mul(u(i), u(j)));
        }
        case 2: return mul(c(coef), pow(u(i), c(2.0)));
        case 3: return mul(c(coef), sin(u(i)));
        default: return mul(c(coef), cos(u(i)));
    }
}

SystemExpr corrupt(const SystemExpr &sys, const CorruptionConfig &cfg, Rng &rng) {
    const bool edits_terms = cfg.deletion_prob > 0.0 || cfg.addition_prob > 0.0;
    if (edits_terms && !is_additive_form(sys))
        throw NotInAdditiveForm("term deletion/addition needs a sum-of-terms system");
    SystemExpr out;
    out.components.reserve(sys.dim());
    for (const auto &comp : sys.components) {
        if (!edits_terms) {
            out.components.push_back(cfg.unknown_coefficients ? mask_coefficients(comp) : comp);
            continue;
        }
        auto terms = terms_of(comp);
        if (cfg.deletion_prob > 0.0 && rng.bernoulli(cfg.deletion_prob) && terms.size() > 1)
            terms.erase(terms.begin() + static_cast<std::ptrdiff_t>(rng.index(terms.size())));
        if (cfg.addition_prob > 0.0 && rng.bernoulli(cfg.addition_prob)) {
            Expr t = sample_pool_term(sys.dim(), rng);
            const auto at = rng.index(terms.size() + 1);
            terms.insert(terms.begin() + static_cast<std::ptrdiff_t>(at), std::move(t));
        }
        Expr rebuilt = sum(std::move(terms));
        out.components.push_back(cfg.unknown_coefficients ? mask_coefficients(rebuilt) : std::move(rebuilt));
    }
    return out;
}

namespace {
double l2(const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}
}  // namespace

double expression_error(const SystemExpr &f, const SystemExpr &f_hat, Rng &rng, int n_points, double box) {
    if (f.dim() != f_hat.dim())
        throw DimensionMismatch("true system has dimension " + std::to_string(f.dim()) + ", candidate " +
                                std::to_string(f_hat.dim()));
    constexpr int kAttempts = 10;
    const std::size_t d = f.dim();
    std::vector<double> point(d);
    double total = 0.0;
    int used = 0;
    for (int p = 0; p < n_points; ++p) {
        for (int attempt = 0; attempt < kAttempts; ++attempt) {
            for (auto &x : point) x = rng.uniform(-box, box);
            try {
                const auto a = evaluate(f, point);
                const auto b = evaluate(f_hat, point);
                const double denom = l2(a);
                if (denom == 0.0) continue;
                std::vector<double> diff(d);
                for (std::size_t i = 0; i < d; ++i) diff[i] = a[i] - b[i];
                const double r = l2(diff) / denom;
                if (!std::isfinite(r)) continue;
                total += r;
                ++used;
                break;
            } catch (const DomainError &) {
                continue;
            }
        }
    }
    if (used == 0) return std::numeric_limits<double>::quiet_NaN();
    return total / used;
}

}  // namespace prose::symbolic
