#include "prose/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "prose/dataset.hpp"
#include "prose/errors.hpp"
#include "prose/integrate.hpp"
#include "prose/model.hpp"
#include "prose/nn/gradcheck.hpp"
#include "prose/ode_dict.hpp"
#include "prose/symbolic/polish.hpp"
#include "prose/train_eval.hpp"

namespace prose {
namespace {

std::string fmt(const char *f, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

SelfCheck tokenizer_round_trip() {
    const symbolic::Vocabulary vocab;
    Rng rng(1);
    const ode::SamplingConfig sc;
    std::size_t failures = 0;
    double worst = 0.0;
    constexpr int kSystems = 1500;
    for (int i = 0; i < kSystems; ++i) {
        const auto &fam = ode::catalog()[static_cast<std::size_t>(i) % ode::catalog().size()];
        const auto inst = ode::sample_instance(fam, sc, rng);
        try {
            const auto tokens = symbolic::to_polish(inst.system, vocab);
            const auto back = symbolic::from_polish(tokens, vocab);
            if (symbolic::to_polish(back, vocab) != tokens) ++failures;
            std::vector<double> point(fam.dim);
            for (auto &x : point) x = rng.uniform(-1.0, 1.0);
            const auto a = symbolic::evaluate(inst.system, point);
            const auto b = symbolic::evaluate(back, point);
            double num = 0.0, den = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) {
                num += (a[k] - b[k]) * (a[k] - b[k]);
                den += a[k] * a[k];
            }
            if (den > 0.0) worst = std::max(worst, std::sqrt(num / den));
        } catch (const Error &) {
            ++failures;
        }
    }
    return {"tokenizer round trip", failures == 0 && worst < 5e-2,
            fmt("%.0f failures, worst relative value change %.2e", static_cast<double>(failures), worst)};
}

SelfCheck float_encoding() {
    const auto t = symbolic::encode_float(2.6);
    const symbolic::Vocabulary vocab;
    const auto words = symbolic::polish_words({{symbolic::c(2.6)}});
    std::string joined;
    for (const auto &w : words) joined += (joined.empty() ? "" : " ") + w;
    const bool ok = !t.negative && t.mantissa == 260 && t.exponent == -2 && joined == "+ 260 E-2";
    return {"float encoding", ok, "2.6 -> " + joined};
}

SelfCheck solver_closed_forms() {
    const std::vector<double> decay_grid{0.0, 1.0};
    const auto decay = integrate::solve([](const integrate::Vector &u) -> integrate::Vector { return -u; },
                                        integrate::Vector::Constant(1, 1.0), decay_grid);
    const double e1 = std::fabs(decay.values(1, 0) - std::exp(-1.0));
    const std::vector<double> osc_grid{0.0, 2.0 * std::numbers::pi};
    const auto osc = integrate::solve(
        [](const integrate::Vector &u) -> integrate::Vector {
            integrate::Vector d(2);
            d << u(1), -u(0);
            return d;
        },
        integrate::Vector::Unit(2, 0), osc_grid);
    const double e2 = std::hypot(osc.values(1, 0) - 1.0, osc.values(1, 1));
    return {"solver closed forms", e1 < 1e-4 && e2 < 1e-3, fmt("decay error %.2e, oscillator error %.2e", e1, e2)};
}

SelfCheck noise_calibration() {
    const symbolic::Vocabulary vocab;
    auto cfg = data::DatasetConfig::preset(data::ExperimentMode::Skeleton);
    cfg.instances_per_family = 1;
    cfg.ics_per_instance = 2;
    cfg.seed = 3;
    double worst = 0.0;
    for (std::size_t i = 0; i < cfg.size(); ++i) {
        const auto g = data::make_sample(cfg, i, vocab);
        const auto &s = g.sample;
        const auto n_in = static_cast<Eigen::Index>(s.input_times.size());
        const auto d = static_cast<Eigen::Index>(s.dim);
        data::Matrix noisy(g.clean.values.rows(), d);
        noisy.topRows(n_in) = s.input_values.leftCols(d);
        noisy.bottomRows(noisy.rows() - n_in) = s.labels.leftCols(d);
        const double snr = (noisy - g.clean.values).norm() / g.clean.values.norm();
        worst = std::max(worst, std::fabs(snr - cfg.snr));
    }
    return {"noise calibration", worst < 1e-12, fmt("worst |snr - 0.02| = %.2e", worst)};
}

SelfCheck model_gradients() {
    const symbolic::Vocabulary vocab;
    auto dcfg = data::DatasetConfig::preset(data::ExperimentMode::Skeleton);
    dcfg.instances_per_family = 1;
    dcfg.ics_per_instance = 1;
    dcfg.input_points = 6;
    dcfg.label_points = 4;
    auto s = data::generate(dcfg, vocab, 0, 1).front();
    model::ProseConfig mc;
    mc.width = 8;
    mc.heads = 2;
    mc.ffn = 12;
    mc.data_encoder_layers = mc.symbol_encoder_layers = mc.fusion_layers = 1;
    mc.data_decoder_layers = mc.symbol_decoder_layers = 1;
    mc.init_seed = 9;
    model::Prose m(mc);
    const auto r = nn::check_gradients(
        m.params(), [&](nn::Tape &t) { return train::sample_loss(t, m, s, 6.0, 1.0).total; }, 1e-5, 4, 2);
    return {"model gradients", r.max_rel_error < 1e-3,
            fmt("max relative error %.2e over %.0f entries", r.max_rel_error, static_cast<double>(r.entries_checked))};
}

}  // namespace

std::vector<SelfCheck> run_selftest(const std::function<void(const SelfCheck &)> &report) {
    std::vector<SelfCheck> out;
    for (auto check : {tokenizer_round_trip, float_encoding, solver_closed_forms, noise_calibration, model_gradients}) {
        SelfCheck c;
        try {
            c = check();
        } catch (const std::exception &e) {
            c = {"(exception)", false, e.what()};
        }
        if (report) report(c);
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace prose
