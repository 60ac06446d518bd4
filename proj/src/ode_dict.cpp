#include "prose/ode_dict.hpp"

#include <cmath>

#include "prose/errors.hpp"

namespace prose::ode {

using namespace prose::symbolic;

namespace {

// Coefficient-carrying term: always mul(c, ...) so every instance of a family
// shares one skeleton regardless of the sampled value.
Expr term(double coef, std::vector<Expr> factors) { return mul(c(coef), product(std::move(factors))); }
Expr sq(int i) { return pow(u(i), c(2.0)); }
Expr cube(int i) { return pow(u(i), c(3.0)); }

OdeFamily make(std::string name, std::string display, std::size_t dim, std::vector<Parameter> params,
               std::function<SystemExpr(std::span<const double>)> build, bool additive = true) {
    OdeFamily f;
    f.name = std::move(name);
    f.display_name = std::move(display);
    f.dim = dim;
    f.params = std::move(params);
    f.build = std::move(build);
    f.additive = additive;
    return f;
}

OdeFamily lorenz96(std::size_t n) {
    return make("lorenz96_" + std::to_string(n), "Lorenz 96 (N=" + std::to_string(n) + ")", n, {{"F", 8.0}},
                [n](std::span<const double> p) {
                    const int N = static_cast<int>(n);
                    auto idx = [N](int i) { return ((i % N) + N) % N; };
                    SystemExpr s;
                    for (int i = 0; i < N; ++i) {
                        s.components.push_back(sum({mul(u(idx(i + 1)), u(idx(i - 1))),
                                                    neg(mul(u(idx(i - 2)), u(idx(i - 1)))), neg(u(i)), c(p[0])}));
                    }
                    return s;
                });
}

std::vector<OdeFamily> build_catalog() {
    std::vector<OdeFamily> cat;

    cat.push_back(make("thomas", "Thomas' cyclically symmetric attractor", 3, {{"b", 0.17}},
                       [](std::span<const double> p) {
                           const double b = p[0];
                           return SystemExpr{{add(sin(u(1)), term(-b, {u(0)})), add(sin(u(2)), term(-b, {u(1)})),
                                              add(sin(u(0)), term(-b, {u(2)}))}};
                       }));

    cat.push_back(make("lorenz3d", "Lorenz 3D system", 3, {{"sigma", 10.0}, {"beta", 8.0 / 3.0}, {"rho", 28.0}},
                       [](std::span<const double> p) {
                           const double sigma = p[0], beta = p[1], rho = p[2];
                           return SystemExpr{{
                               add(term(sigma, {u(1)}), term(-sigma, {u(0)})),
                               sum({term(rho, {u(0)}), neg(mul(u(0), u(2))), neg(u(1))}),
                               add(mul(u(0), u(1)), term(-beta, {u(2)})),
                           }};
                       }));

    // The displayed system has no term for e; only the parameters that appear
    // in the right-hand side are sampled.
    cat.push_back(make("aizawa", "Aizawa attractor", 3,
                       {{"a", 0.95}, {"b", 0.7}, {"c", 0.6}, {"d", 3.5}, {"f", 0.1}},
                       [](std::span<const double> p) {
                           const double a = p[0], b = p[1], cc = p[2], d = p[3], f = p[4];
                           return SystemExpr{{
                               sum({mul(u(0), u(2)), term(-b, {u(0)}), term(-d, {u(1)})}),
                               sum({term(d, {u(0)}), mul(u(1), u(2)), term(-b, {u(1)})}),
                               sum({c(cc), term(a, {u(2)}), term(-1.0 / 3.0, {cube(2)}), neg(sq(0)),
                                    term(f, {u(2), cube(0)})}),
                           }};
                       }));

    cat.push_back(make("chen_lee", "Chen-Lee attractor", 3, {{"a", 5.0}, {"d", -0.38}},
                       [](std::span<const double> p) {
                           const double a = p[0], d = p[1];
                           return SystemExpr{{
                               add(term(a, {u(0)}), neg(mul(u(1), u(2)))),
                               add(term(-10.0, {u(1)}), mul(u(0), u(2))),
                               add(term(d, {u(2)}), term(1.0 / 3.0, {u(0), u(1)})),
                           }};
                       }));

    cat.push_back(make("dadras", "Dadras attractor", 3,
                       {{"a", 1.25}, {"b", 1.15}, {"c", 0.75}, {"d", 0.8}, {"e", 4.0}},
                       [](std::span<const double> p) {
                           const double a = p[0], b = p[1], cc = p[2], d = p[3], e = p[4];
                           return SystemExpr{{
                               sum({term(0.5, {u(1)}), term(-a, {u(0)}), term(b, {u(1), u(2)})}),
                               sum({term(cc, {u(1)}), term(-0.5, {u(0), u(2)}), term(0.5, {u(2)})}),
                               add(term(d, {u(0), u(1)}), term(-e, {u(2)})),
                           }};
                       }));

    cat.push_back(make("rossler", "Rossler attractor", 3, {{"a", 0.1}, {"b", 0.1}, {"c", 14.0}},
                       [](std::span<const double> p) {
                           const double a = p[0], b = p[1], cc = p[2];
                           return SystemExpr{{
                               add(neg(u(1)), neg(u(2))),
                               add(u(0), term(a, {u(1)})),
                               sum({c(b), mul(u(0), u(2)), term(-cc, {u(2)})}),
                           }};
                       }));

    cat.push_back(make("halvorsen", "Halvorsen attractor", 3, {{"a", -0.35}},
                       [](std::span<const double> p) {
                           const double a = p[0];
                           SystemExpr s;
                           for (int i = 0; i < 3; ++i) {
                               const int j = (i + 1) % 3, k = (i + 2) % 3;
                               s.components.push_back(
                                   sum({term(a, {u(i)}), neg(u(j)), neg(u(k)), term(-0.25, {sq(j)})}));
                           }
                           return s;
                       }));

    cat.push_back(make("rabinovich_fabrikant", "Rabinovich-Fabrikant equation", 3,
                       {{"alpha", 0.98}, {"gamma", 0.1}},
                       [](std::span<const double> p) {
                           const double alpha = p[0], gamma = p[1];
                           return SystemExpr{{
                               sum({mul(u(1), u(2)), neg(u(1)), mul(sq(0), u(1)), term(gamma, {u(0)})}),
                               sum({term(3.0, {u(0), u(2)}), u(0), neg(cube(0)), term(gamma, {u(1)})}),
                               add(term(-2.0 * alpha, {u(2)}), term(-2.0, {u(0), u(1), u(2)})),
                           }};
                       }));

    cat.push_back(make("sprott_b", "Sprott B attractor", 3, {{"a", 0.4}, {"b", 1.2}, {"c", 1.0}},
                       [](std::span<const double> p) {
                           const double a = p[0], b = p[1], cc = p[2];
                           return SystemExpr{{
                               term(a, {u(1), u(2)}),
                               add(u(0), term(-b, {u(1)})),
                               add(c(cc), neg(mul(u(0), u(1)))),
                           }};
                       }));

    cat.push_back(make("sprott_linz_f", "Sprott-Linz F attractor", 3, {{"a", 0.5}},
                       [](std::span<const double> p) {
                           const double a = p[0];
                           return SystemExpr{{
                               add(u(1), u(2)),
                               add(neg(u(0)), term(a, {u(1)})),
                               add(sq(0), neg(u(2))),
                           }};
                       }));

    cat.push_back(make("four_wing", "Four-wing chaotic attractor", 3, {{"a", 0.2}, {"b", 0.01}, {"c", -0.4}},
                       [](std::span<const double> p) {
                           const double a = p[0], b = p[1], cc = p[2];
                           return SystemExpr{{
                               add(term(a, {u(0)}), mul(u(1), u(2))),
                               sum({term(b, {u(0)}), term(cc, {u(1)}), neg(mul(u(0), u(2)))}),
                               add(neg(u(2)), neg(mul(u(0), u(1)))),
                           }};
                       }));

    cat.push_back(make("duffing", "Duffing equation", 3,
                       {{"alpha", 1.0}, {"beta", 5.0}, {"gamma", 8.0}, {"delta", 0.02}, {"omega", 0.5}},
                       [](std::span<const double> p) {
                           const double alpha = p[0], beta = p[1], gamma = p[2], delta = p[3], omega = p[4];
                           return SystemExpr{{
                               c(1.0),
                               u(2),
                               sum({term(-delta, {u(2)}), term(-alpha, {u(1)}), term(-beta, {cube(1)}),
                                    term(gamma, {cos(term(omega, {u(0)}))})}),
                           }};
                       }));

    cat.push_back(lorenz96(4));

    cat.push_back(make(
        "double_pendulum", "Double Pendulum", 4, {{"g", 9.81}, {"l", 1.0}},
        [](std::span<const double> p) {
            const double G = p[0] / p[1];
            auto diff12 = [] { return sub(u(0), u(1)); };
            auto denom = [&] { return sub(c(3.0), cos(mul(c(2.0), diff12()))); };
            Expr num3 = sum({term(-3.0 * G, {sin(u(0))}), term(-G, {sin(sub(u(0), mul(c(2.0), u(1))))}),
                             term(-2.0, {sin(diff12()), add(pow(u(3), c(2.0)), mul(pow(u(2), c(2.0)), cos(diff12())))})});
            Expr num4 = mul(sin(diff12()), sum({term(4.0, {pow(u(2), c(2.0))}), term(4.0 * G, {cos(u(0))}),
                                                mul(pow(u(3), c(2.0)), cos(diff12()))}));
            return SystemExpr{{u(2), u(3), div(std::move(num3), denom()), div(std::move(num4), denom())}};
        },
        /*additive=*/false));

    cat.push_back(lorenz96(5));
    return cat;
}

}  // namespace

std::vector<double> OdeFamily::base_values() const {
    std::vector<double> v;
    v.reserve(params.size());
    for (const auto &p : params) v.push_back(p.base);
    return v;
}

const std::vector<OdeFamily> &catalog() {
    static const std::vector<OdeFamily> cat = build_catalog();
    return cat;
}

std::size_t family_index(const std::string &name) {
    const auto &cat = catalog();
    for (std::size_t i = 0; i < cat.size(); ++i)
        if (cat[i].name == name) return i;
    throw Error("unknown ODE family '" + name + "'");
}

const OdeFamily &family(const std::string &name) { return catalog()[family_index(name)]; }

std::vector<double> sample_params(const OdeFamily &fam, const SamplingConfig &cfg, Rng &rng) {
    std::vector<double> v;
    v.reserve(fam.params.size());
    for (const auto &p : fam.params) {
        const double half = cfg.lambda * std::fabs(p.base);
        v.push_back(half == 0.0 ? p.base : rng.uniform(p.base - half, p.base + half));
    }
    return v;
}

std::vector<double> sample_initial_condition(std::size_t dim, const SamplingConfig &cfg, Rng &rng) {
    std::vector<double> u0(dim);
    for (auto &x : u0) x = rng.uniform(-cfg.ic_box, cfg.ic_box);
    return u0;
}

Instance sample_instance(const OdeFamily &fam, const SamplingConfig &cfg, Rng &rng) {
    Instance inst;
    inst.params = sample_params(fam, cfg, rng);
    inst.system = fam.build(inst.params);
    inst.u0 = sample_initial_condition(fam.dim, cfg, rng);
    return inst;
}

}  // namespace prose::ode
