#include "prose/nn/optim.hpp"

#include <cmath>

#include "prose/errors.hpp"

namespace prose::nn {

AdamW::AdamW(ParamStore &params, AdamWConfig cfg) : params_(params), cfg_(cfg) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto &p = params_[i].value;
        m_.push_back(Mat::Zero(p.rows(), p.cols()));
        v_.push_back(Mat::Zero(p.rows(), p.cols()));
    }
}

double AdamW::step(double lr) {
    if (m_.size() != params_.size()) throw Error("parameter store changed after optimizer construction");
    const double norm = params_.grad_norm();
    if (!std::isfinite(norm)) throw NonFiniteGradient("gradient norm is not finite");
    const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto &p = params_[i];
        const Mat g = clip * p.grad;
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseAbs2();
        p.value *= 1.0 - lr * cfg_.weight_decay;
        p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
    }
    return norm;
}

double lr_at_step(std::int64_t step, double base, std::int64_t warmup) {
    if (step < 0) throw Error("negative step");
    if (warmup <= 0) return base;
    if (step <= warmup) return base * static_cast<double>(step) / static_cast<double>(warmup);
    return base * std::sqrt(static_cast<double>(warmup) / static_cast<double>(step));
}

}  // namespace prose::nn
