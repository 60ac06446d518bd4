#include "prose/nn/gradcheck.hpp"

#include <cmath>

namespace prose::nn {

GradCheckResult check_gradients(ParamStore &params, const std::function<Var(Tape &)> &build, double step,
                                std::size_t max_entries, std::uint64_t seed, double floor) {
    params.zero_grad();
    {
        Tape t(true);
        t.backward(build(t));
    }
    auto eval = [&] {
        Tape t(false);
        return t.scalar(build(t));
    };

    GradCheckResult res;
    Rng rng(seed);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param &p = params[pi];
        const auto n = static_cast<std::size_t>(p.value.size());
        std::vector<std::size_t> idx;
        if (max_entries == 0 || max_entries >= n) {
            for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        } else {
            for (std::size_t i = 0; i < max_entries; ++i) idx.push_back(rng.index(n));
        }
        double diff = 0.0, na = 0.0, nf = 0.0;
        for (auto i : idx) {
            double &x = p.value.data()[i];
            const double keep = x;
            x = keep + step;
            const double up = eval();
            x = keep - step;
            const double down = eval();
            x = keep;
            const double fd = (up - down) / (2.0 * step);
            const double an = p.grad.data()[i];
            diff += (an - fd) * (an - fd);
            na += an * an;
            nf += fd * fd;
        }
        res.entries_checked += idx.size();
        const double denom = std::max(std::sqrt(na), std::sqrt(nf));
        const double rel = denom < floor ? 0.0 : std::sqrt(diff) / denom;
        if (res.worst_param.empty() || rel > res.max_rel_error) {
            res.max_rel_error = rel;
            res.worst_param = p.name;
        }
    }
    return res;
}

}  // namespace prose::nn
