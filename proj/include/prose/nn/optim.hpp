#pragma once

#include <cstdint>
#include <vector>

#include "prose/nn/tape.hpp"

namespace prose::nn {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    double clip_norm = 1.0;  // <= 0 disables clipping
};

/// AdamW with global-norm clipping and bias correction. Weight decay is
/// decoupled and applied to every parameter.
class AdamW {
   public:
    AdamW(ParamStore &params, AdamWConfig cfg = {});

    /// Clips the accumulated grads, updates moments and parameters with
    /// learning rate `lr`. Returns the pre-clip gradient norm. Throws
    /// NonFiniteGradient (leaving parameters untouched) on NaN/Inf grads.
    double step(double lr);

    std::int64_t steps() const { return steps_; }
    const AdamWConfig &config() const { return cfg_; }
    const Mat &first_moment(std::size_t i) const { return m_[i]; }
    const Mat &second_moment(std::size_t i) const { return v_[i]; }

   private:
    ParamStore &params_;
    AdamWConfig cfg_;
    std::vector<Mat> m_, v_;
    std::int64_t steps_ = 0;
};

/// Linear warmup from 0 to `base` over `warmup` steps, then
/// base * sqrt(warmup / step). warmup = 0 gives a constant rate.
double lr_at_step(std::int64_t step, double base, std::int64_t warmup);

}  // namespace prose::nn
