#include <doctest.h>

#include <cmath>
#include <map>

#include "prose/errors.hpp"
#include "prose/ode_dict.hpp"

using namespace prose;

namespace {

using Vec = std::vector<double>;

// Direct transcriptions of each right-hand side, parameters in catalog order.
Vec closed_form(const std::string &name, const Vec &p, const Vec &x) {
    if (name == "thomas") {
        const double b = p[0];
        return {std::sin(x[1]) - b * x[0], std::sin(x[2]) - b * x[1], std::sin(x[0]) - b * x[2]};
    }
    if (name == "lorenz3d") {
        const double s = p[0], be = p[1], r = p[2];
        return {s * (x[1] - x[0]), x[0] * (r - x[2]) - x[1], x[0] * x[1] - be * x[2]};
    }
    if (name == "aizawa") {
        const double a = p[0], b = p[1], c = p[2], d = p[3], f = p[4];
        return {(x[2] - b) * x[0] - d * x[1], d * x[0] + (x[2] - b) * x[1],
                c + a * x[2] - x[2] * x[2] * x[2] / 3 - x[0] * x[0] + f * x[2] * x[0] * x[0] * x[0]};
    }
    if (name == "chen_lee") {
        const double a = p[0], d = p[1];
        return {a * x[0] - x[1] * x[2], -10 * x[1] + x[0] * x[2], d * x[2] + x[0] * x[1] / 3};
    }
    if (name == "dadras") {
        const double a = p[0], b = p[1], c = p[2], d = p[3], e = p[4];
        return {x[1] / 2 - a * x[0] + b * x[1] * x[2], c * x[1] - x[0] * x[2] / 2 + x[2] / 2, d * x[0] * x[1] - e * x[2]};
    }
    if (name == "rossler") {
        const double a = p[0], b = p[1], c = p[2];
        return {-x[1] - x[2], x[0] + a * x[1], b + x[2] * (x[0] - c)};
    }
    if (name == "halvorsen") {
        const double a = p[0];
        return {a * x[0] - x[1] - x[2] - x[1] * x[1] / 4, a * x[1] - x[2] - x[0] - x[2] * x[2] / 4,
                a * x[2] - x[0] - x[1] - x[0] * x[0] / 4};
    }
    if (name == "rabinovich_fabrikant") {
        const double al = p[0], g = p[1];
        return {x[1] * (x[2] - 1 + x[0] * x[0]) + g * x[0], x[0] * (3 * x[2] + 1 - x[0] * x[0]) + g * x[1],
                -2 * x[2] * (al + x[0] * x[1])};
    }
    if (name == "sprott_b") {
        const double a = p[0], b = p[1], c = p[2];
        return {a * x[1] * x[2], x[0] - b * x[1], c - x[0] * x[1]};
    }
    if (name == "sprott_linz_f") {
        const double a = p[0];
        return {x[1] + x[2], -x[0] + a * x[1], x[0] * x[0] - x[2]};
    }
    if (name == "four_wing") {
        const double a = p[0], b = p[1], c = p[2];
        return {a * x[0] + x[1] * x[2], b * x[0] + c * x[1] - x[0] * x[2], -x[2] - x[0] * x[1]};
    }
    if (name == "duffing") {
        const double al = p[0], be = p[1], g = p[2], de = p[3], om = p[4];
        return {1.0, x[2], -de * x[2] - al * x[1] - be * x[1] * x[1] * x[1] + g * std::cos(om * x[0])};
    }
    if (name == "lorenz96_4" || name == "lorenz96_5") {
        const int n = static_cast<int>(x.size());
        auto at = [&](int i) { return x[static_cast<std::size_t>(((i % n) + n) % n)]; };
        Vec out(x.size());
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = (at(i + 1) - at(i - 2)) * at(i - 1) - at(i) + p[0];
        return out;
    }
    if (name == "double_pendulum") {
        const double gl = p[0] / p[1];
        const double d = x[0] - x[1];
        const double den = 3 - std::cos(2 * d);
        return {x[2], x[3],
                (-3 * gl * std::sin(x[0]) - gl * std::sin(x[0] - 2 * x[1]) -
                 2 * std::sin(d) * (x[3] * x[3] + x[2] * x[2] * std::cos(d))) /
                    den,
                std::sin(d) * (4 * x[2] * x[2] + 4 * gl * std::cos(x[0]) + x[3] * x[3] * std::cos(d)) / den};
    }
    throw std::runtime_error("no closed form for " + name);
}

}  // namespace

TEST_CASE("catalog census") {
    const auto &cat = ode::catalog();
    CHECK(cat.size() == 15);
    std::map<std::size_t, int> census;
    for (const auto &f : cat) ++census[f.dim];
    CHECK(census[3] == 12);
    CHECK(census[4] == 2);
    CHECK(census[5] == 1);
    for (const auto &f : cat) CHECK(f.base_system().dim() == f.dim);
    CHECK_THROWS_AS(ode::family("nope"), Error);
}

TEST_CASE("base parameter values") {
    CHECK(ode::family("lorenz3d").base_values() == std::vector<double>{10.0, 8.0 / 3.0, 28.0});
    CHECK(ode::family("thomas").base_values() == std::vector<double>{0.17});
    CHECK(ode::family("duffing").base_values() == std::vector<double>{1, 5, 8, 0.02, 0.5});
    CHECK(ode::family("halvorsen").base_values() == std::vector<double>{-0.35});
    CHECK(ode::family("double_pendulum").base_values() == std::vector<double>{9.81, 1.0});
    CHECK_FALSE(ode::family("double_pendulum").additive);
}

TEST_CASE("every family matches its closed form on sampled instances") {
    Rng rng(17);
    for (const auto &fam : ode::catalog()) {
        for (int inst_i = 0; inst_i < 5; ++inst_i) {
            const auto inst = ode::sample_instance(fam, {}, rng);
            for (int k = 0; k < 100; ++k) {
                Vec x(fam.dim);
                for (auto &v : x) v = rng.uniform(-3, 3);
                const auto got = symbolic::evaluate(inst.system, x);
                const auto want = closed_form(fam.name, inst.params, x);
                for (std::size_t i = 0; i < fam.dim; ++i) {
                    const double scale = std::max(1.0, std::fabs(want[i]));
                    CHECK_MESSAGE(std::fabs(got[i] - want[i]) <= 1e-12 * scale, fam.name);
                }
            }
        }
    }
}

TEST_CASE("sampling intervals") {
    Rng rng(1);
    const ode::SamplingConfig zero{.lambda = 0.0};
    for (const auto &fam : ode::catalog()) CHECK(ode::sample_params(fam, zero, rng) == fam.base_values());

    const auto &halv = ode::family("halvorsen");
    for (int i = 0; i < 1000; ++i) {
        const double a = ode::sample_params(halv, {}, rng)[0];
        CHECK(a >= -0.385);
        CHECK(a <= -0.315);
    }
    // the figure-5 instance lies inside the training interval
    CHECK(-0.327 >= -0.385);
    CHECK(-0.327 <= -0.315);

    // sign preservation for every parameter
    for (const auto &fam : ode::catalog()) {
        for (int i = 0; i < 50; ++i) {
            const auto p = ode::sample_params(fam, {.lambda = 0.2}, rng);
            for (std::size_t k = 0; k < p.size(); ++k) CHECK((p[k] > 0) == (fam.params[k].base > 0));
        }
    }

    const auto inst = ode::sample_instance(ode::family("lorenz96_5"), {}, rng);
    CHECK(inst.u0.size() == 5);
    for (double x : inst.u0) CHECK(std::fabs(x) <= 2.0);
}

TEST_CASE("Thomas coefficient statistics") {
    Rng rng(99);
    const auto &thomas = ode::family("thomas");
    const int n = 10000;
    double lo = 1e9, hi = -1e9, mean = 0.0;
    for (int i = 0; i < n; ++i) {
        const double b = ode::sample_params(thomas, {}, rng)[0];
        lo = std::min(lo, b);
        hi = std::max(hi, b);
        mean += b;
    }
    mean /= n;
    CHECK(lo >= 0.153);
    CHECK(hi <= 0.187);
    const double se = 0.017 / std::sqrt(3.0) / std::sqrt(static_cast<double>(n));  // uniform half-width 0.017
    CHECK(std::fabs(mean - 0.17) <= 3 * se);
}

TEST_CASE("sampling is deterministic given the seed") {
    Rng a(5), b(5);
    for (const auto &fam : ode::catalog()) {
        const auto x = ode::sample_instance(fam, {}, a);
        const auto y = ode::sample_instance(fam, {}, b);
        CHECK(x.system == y.system);
        CHECK(x.u0 == y.u0);
    }
}
