#pragma once

#include <functional>
#include <string>

#include "prose/nn/tape.hpp"

namespace prose::nn {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t entries_checked = 0;
};

/// Compares tape gradients of the scalar built by `build` with central
/// differences, parameter tensor by parameter tensor. The error of a tensor
/// is |g_tape - g_fd| / max(|g_tape|, |g_fd|) over the checked entries
/// (tensors whose gradients are both below `floor` in norm count as exact).
/// max_entries = 0 checks every entry; otherwise that many random entries
/// per tensor are checked.
GradCheckResult check_gradients(ParamStore &params, const std::function<Var(Tape &)> &build, double step = 1e-5,
                                std::size_t max_entries = 0, std::uint64_t seed = 0, double floor = 1e-9);

}  // namespace prose::nn
