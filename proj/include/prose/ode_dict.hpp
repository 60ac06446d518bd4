#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "prose/rng.hpp"
#include "prose/symbolic/expr.hpp"

namespace prose::ode {

struct Parameter {
    std::string name;
    double base = 0.0;
};

/// One system family of the ODE dictionary.
struct OdeFamily {
    std::string name;  // stable identifier, e.g. "lorenz3d"
    std::string display_name;
    std::size_t dim = 0;
    std::vector<Parameter> params;
    /// Builds the right-hand side in additive-term normal form (where the
    /// family admits one) from concrete parameter values (same order as params).
    std::function<symbolic::SystemExpr(std::span<const double>)> build;
    /// False for families whose right-hand side is not a sum of simple terms;
    /// term deletion/addition is skipped for them.
    bool additive = true;

    std::vector<double> base_values() const;
    symbolic::SystemExpr base_system() const { return build(base_values()); }
};

struct SamplingConfig {
    double lambda = 0.10;  // coefficient half-width relative to the base value
    double ic_box = 2.0;   // initial conditions ~ U[-ic_box, ic_box]^d
};

struct Instance {
    symbolic::SystemExpr system;
    std::vector<double> params;
    std::vector<double> u0;
};

/// The immutable 15-family catalog, in a fixed order.
const std::vector<OdeFamily> &catalog();

/// Looks up a family by identifier; throws prose::Error when absent.
const OdeFamily &family(const std::string &name);
std::size_t family_index(const std::string &name);

/// Each parameter drawn from U[F - λ|F|, F + λ|F|]; u0 from the IC box.
std::vector<double> sample_params(const OdeFamily &fam, const SamplingConfig &cfg, Rng &rng);
std::vector<double> sample_initial_condition(std::size_t dim, const SamplingConfig &cfg, Rng &rng);
Instance sample_instance(const OdeFamily &fam, const SamplingConfig &cfg, Rng &rng);

}  // namespace prose::ode
