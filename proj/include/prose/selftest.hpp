#pragma once

#include <functional>
#include <string>
#include <vector>

namespace prose {

struct SelfCheck {
    std::string name;
    bool ok = false;
    std::string detail;
};

/// Quick end-to-end oracles: tokenizer round trip, float encoding, solver
/// against closed forms, noise calibration and a model gradient check.
/// Takes a few seconds.
std::vector<SelfCheck> run_selftest(const std::function<void(const SelfCheck &)> &report = {});

}  // namespace prose
