#include "prose/train_eval.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "prose/errors.hpp"
#include "prose/nn/optim.hpp"
#include "prose/symbolic/corrupt.hpp"
#include "prose/symbolic/polish.hpp"

namespace prose::train {

void TrainConfig::validate() const {
    if (!(alpha > 0.0) || beta < 0.0) throw Error("loss weights need alpha > 0 and beta >= 0");
    if (!(lr > 0.0) || weight_decay < 0.0) throw Error("invalid learning rate or weight decay");
    if (warmup_fraction < 0.0 || warmup_fraction > 1.0) throw Error("warmup fraction outside [0, 1]");
    if (batch_size == 0 || epochs == 0) throw Error("batch size and epochs must be positive");
}

nlohmann::json to_json(const TrainConfig &c) {
    return {{"alpha", c.alpha},
            {"beta", c.beta},
            {"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"warmup_fraction", c.warmup_fraction},
            {"clip_norm", c.clip_norm},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json &j) {
    TrainConfig c;
    for (const auto &[key, v] : j.items()) {
        if (key == "alpha") c.alpha = v.get<double>();
        else if (key == "beta") c.beta = v.get<double>();
        else if (key == "lr") c.lr = v.get<double>();
        else if (key == "weight_decay") c.weight_decay = v.get<double>();
        else if (key == "warmup_fraction") c.warmup_fraction = v.get<double>();
        else if (key == "clip_norm") c.clip_norm = v.get<double>();
        else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
        else if (key == "epochs") c.epochs = v.get<std::size_t>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else throw Error("unknown train config key '" + key + "'");
    }
    c.validate();
    return c;
}

std::uint64_t config_hash(const TrainConfig &cfg) { return data::fnv1a(to_json(cfg).dump()); }

namespace {

symbolic::TokenSeq with_eos(const symbolic::TokenSeq &target) {
    auto out = target;
    out.push_back(2);
    return out;
}

void log_line(const TrainHooks &h, const std::string &msg) {
    if (h.log) h.log(msg);
}

}  // namespace

SampleLoss sample_loss(nn::Tape &t, const model::Prose &m, const data::Sample &s, double alpha, double beta) {
    const bool symbols = beta > 0.0 && m.config().multimodal;
    const auto out = m.forward(t, s, symbols);
    SampleLoss r;
    const nn::Var ld = nn::relative_squared_loss(t, out.prediction, s.labels, s.mask);
    r.parts.data = t.scalar(ld);
    if (symbols) {
        const nn::Var ls = nn::cross_entropy(t, out.logits, with_eos(s.symbol_target), 0);
        r.parts.symbol = t.scalar(ls);
        r.total = nn::weighted_sum(t, ld, alpha, ls, beta);
    } else {
        r.total = nn::scale(t, ld, alpha);
    }
    r.parts.total = t.scalar(r.total);
    return r;
}

LossParts dataset_loss(const model::Prose &m, const std::vector<data::Sample> &samples, double alpha, double beta) {
    LossParts sum;
    for (const auto &s : samples) {
        nn::Tape t(false);
        const auto r = sample_loss(t, m, s, alpha, beta);
        sum.total += r.parts.total;
        sum.data += r.parts.data;
        sum.symbol += r.parts.symbol;
    }
    const double n = samples.empty() ? 1.0 : static_cast<double>(samples.size());
    return {sum.total / n, sum.data / n, sum.symbol / n};
}

TrainResult train(model::Prose &m, const std::vector<data::Sample> &train_set,
                  const std::vector<data::Sample> &val_set, const TrainConfig &cfg, const TrainHooks &hooks) {
    cfg.validate();
    if (train_set.empty()) throw Error("empty training set");
    const auto start = std::chrono::steady_clock::now();
    auto &params = m.params();
    nn::AdamW opt(params, {.weight_decay = cfg.weight_decay, .clip_norm = cfg.clip_norm});
    const std::size_t per_epoch = (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
    const auto total_steps = static_cast<std::int64_t>(per_epoch * cfg.epochs);
    const auto warmup = static_cast<std::int64_t>(std::llround(cfg.warmup_fraction * static_cast<double>(total_steps)));

    auto snapshot = [&] {
        std::vector<Mat> v;
        for (std::size_t i = 0; i < params.size(); ++i) v.push_back(params[i].value);
        return v;
    };
    auto restore = [&](const std::vector<Mat> &v) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i].value = v[i];
    };
    auto save = [&] {
        if (!hooks.checkpoint.empty()) model::save_checkpoint(m, hooks.checkpoint, hooks.vocab_hash, hooks.run_hash);
    };

    TrainResult res;
    std::vector<Mat> last_good = snapshot();
    std::vector<Mat> best;
    std::vector<std::size_t> order(train_set.size());
    std::int64_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(child_seed(cfg.seed, 0x5eed, epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

        double epoch_sum = 0.0;
        for (std::size_t b = 0; b < per_epoch; ++b) {
            const std::size_t lo = b * cfg.batch_size, hi = std::min(order.size(), lo + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(hi - lo);
            params.zero_grad();
            LossParts batch;
            for (std::size_t k = lo; k < hi; ++k) {
                nn::Tape t(true);
                const auto r = sample_loss(t, m, train_set[order[k]], cfg.alpha, cfg.beta);
                if (!std::isfinite(r.parts.total)) {
                    restore(last_good);
                    save();
                    throw NonFiniteLoss("non-finite loss at step " + std::to_string(step) + " (sample " +
                                        std::to_string(order[k]) + ")");
                }
                t.backward(nn::scale(t, r.total, inv));
                batch.total += inv * r.parts.total;
                batch.data += inv * r.parts.data;
                batch.symbol += inv * r.parts.symbol;
            }
            last_good = snapshot();
            ++step;
            try {
                opt.step(nn::lr_at_step(step, cfg.lr, warmup));
            } catch (const NonFiniteGradient &e) {
                restore(last_good);
                save();
                throw NonFiniteLoss(std::string("optimizer rejected the gradients: ") + e.what());
            }
            res.curve.push_back({step, batch, std::nullopt});
            epoch_sum += batch.total;
        }
        res.epoch_train_loss.push_back(epoch_sum / static_cast<double>(per_epoch));

        const auto val = val_set.empty() ? res.curve.back().train : dataset_loss(m, val_set, cfg.alpha, cfg.beta);
        res.curve.back().val = val;
        res.epoch_val_loss.push_back(val.total);
        if (best.empty() || val.total < res.best_val_loss) {
            best = snapshot();
            res.best_val_loss = val.total;
            res.best_epoch = epoch;
            save();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        char buf[200];
        std::snprintf(buf, sizeof buf, "epoch %zu/%zu  train %.5f  val %.5f (data %.5f, symbol %.5f)  %.0fs",
                      epoch + 1, cfg.epochs, res.epoch_train_loss.back(), val.total, val.data, val.symbol, secs);
        log_line(hooks, buf);
    }
    restore(best);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

void write_loss_curve(const TrainResult &r, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "step,train,val,train_data,train_symbol\n";
    for (const auto &p : r.curve) {
        out << p.step << ',' << p.train.total << ',';
        if (p.val) out << p.val->total;
        out << ',' << p.train.data << ',' << p.train.symbol << '\n';
    }
}

// Evaluation --------------------------------------------------------------------

nlohmann::json to_json(const EvalConfig &c) {
    return {{"symbols", c.symbols},
            {"decode_then_integrate", c.decode_then_integrate},
            {"max_len", c.max_len},
            {"expression_points", c.expression_points},
            {"seed", c.seed}};
}

double MetricsReport::validity_percent() const {
    return samples ? 100.0 * static_cast<double>(valid + domain_errored) / static_cast<double>(samples) : 0.0;
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j{{"samples", samples},
                     {"relative_error_2_4_percent", 100.0 * error_2_4},
                     {"relative_error_2_6_percent", 100.0 * error_2_6}};
    if (symbols) {
        j["valid_expressions_percent"] = validity_percent();
        j["valid"] = valid;
        j["invalid"] = invalid;
        j["truncated"] = truncated;
        j["domain_errored"] = domain_errored;
        j["expression_error_percent"] = valid ? nlohmann::json(100.0 * expression_error) : nlohmann::json();
    }
    if (integrated) {
        j["integrated"] = integrated_ok;
        j["decode_then_integrate_error_percent"] = integrated_ok ? nlohmann::json(100.0 * integrate_error) : nlohmann::json();
        j["data_decoder_error_same_subset_percent"] = integrated_ok ? nlohmann::json(100.0 * data_error_same_subset) : nlohmann::json();
    }
    return j;
}

double relative_l2(const Mat &pred, const Mat &label, const std::vector<std::uint8_t> &mask, Eigen::Index begin,
                   Eigen::Index end) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index j = 0; j < label.cols(); ++j) {
        if (!mask[static_cast<std::size_t>(j)]) continue;
        num += (pred.col(j).segment(begin, end - begin) - label.col(j).segment(begin, end - begin)).squaredNorm();
        den += label.col(j).segment(begin, end - begin).squaredNorm();
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

namespace {

std::optional<symbolic::SystemExpr> parse_for(const model::GreedyResult &out, const data::Sample &s,
                                              const symbolic::Vocabulary &vocab) {
    if (out.truncated) return std::nullopt;
    try {
        auto sys = symbolic::from_polish(out.tokens, vocab);
        if (sys.dim() != s.dim) return std::nullopt;
        for (const auto &c : sys.components)
            if (c.contains(symbolic::Op::Placeholder)) return std::nullopt;
        return sys;
    } catch (const Error &) {
        return std::nullopt;
    }
}

}  // namespace

SymbolOutcome score_symbols(const model::GreedyResult &out, const data::Sample &s, const symbolic::Vocabulary &vocab,
                            int points, std::uint64_t seed, double *expr_error) {
    if (out.truncated) return SymbolOutcome::Truncated;
    const auto sys = parse_for(out, s, vocab);
    if (!sys) return SymbolOutcome::Invalid;
    const auto truth = symbolic::from_polish(s.symbol_target, vocab);
    Rng rng(seed);
    const double e = symbolic::expression_error(truth, *sys, rng, points);
    if (!std::isfinite(e)) return SymbolOutcome::DomainErrored;
    if (expr_error) *expr_error = e;
    return SymbolOutcome::Valid;
}

std::optional<double> decode_then_integrate(const model::GreedyResult &out, const data::Sample &s,
                                            const symbolic::Vocabulary &vocab, const integrate::SolverConfig &solver) {
    const auto sys = parse_for(out, s, vocab);
    if (!sys) return std::nullopt;
    std::vector<double> grid{s.input_times.back()};
    grid.insert(grid.end(), s.query_times.begin(), s.query_times.end());
    integrate::Trajectory tr;
    try {
        tr = integrate::solve(*sys, s.last_input_state, grid, solver);
    } catch (const Error &) {
        return std::nullopt;
    }
    Mat pred = Mat::Zero(static_cast<Eigen::Index>(s.query_times.size()), s.labels.cols());
    pred.leftCols(s.dim) = tr.values.bottomRows(pred.rows());
    if (!pred.allFinite()) return std::nullopt;
    return relative_l2(pred, s.labels, s.mask, 0, pred.rows());
}

MetricsReport evaluate(const model::Prose &m, const std::vector<data::Sample> &samples,
                       const symbolic::Vocabulary &vocab, const EvalConfig &cfg) {
    MetricsReport r;
    r.samples = samples.size();
    r.symbols = cfg.symbols && m.config().multimodal;
    r.integrated = r.symbols && cfg.decode_then_integrate;
    double expr_sum = 0.0, int_sum = 0.0, data_sub = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto &s = samples[i];
        const Mat pred = m.predict(s);
        const auto n = pred.rows();
        const double e26 = relative_l2(pred, s.labels, s.mask, 0, n);
        r.error_2_4 += relative_l2(pred, s.labels, s.mask, 0, n / 2);
        r.error_2_6 += e26;
        if (!r.symbols) continue;
        const auto out = m.generate_symbols(s, cfg.max_len);
        double e = 0.0;
        switch (score_symbols(out, s, vocab, cfg.expression_points, child_seed(cfg.seed, i, 0), &e)) {
            case SymbolOutcome::Valid:
                ++r.valid;
                expr_sum += e;
                break;
            case SymbolOutcome::Invalid: ++r.invalid; break;
            case SymbolOutcome::Truncated: ++r.truncated; break;
            case SymbolOutcome::DomainErrored: ++r.domain_errored; break;
        }
        if (r.integrated) {
            if (const auto d = decode_then_integrate(out, s, vocab, cfg.solver)) {
                ++r.integrated_ok;
                int_sum += *d;
                data_sub += e26;
            }
        }
    }
    if (r.samples) {
        r.error_2_4 /= static_cast<double>(r.samples);
        r.error_2_6 /= static_cast<double>(r.samples);
    }
    if (r.valid) r.expression_error = expr_sum / static_cast<double>(r.valid);
    if (r.integrated_ok) {
        r.integrate_error = int_sum / static_cast<double>(r.integrated_ok);
        r.data_error_same_subset = data_sub / static_cast<double>(r.integrated_ok);
    }
    return r;
}

std::vector<std::pair<double, MetricsReport>> ood_sweep(const model::Prose &m, const data::DatasetConfig &test_cfg,
                                                        const std::vector<double> &lambdas,
                                                        const symbolic::Vocabulary &vocab, const EvalConfig &cfg) {
    std::vector<std::pair<double, MetricsReport>> out;
    for (double lambda : lambdas) {
        auto dc = test_cfg;
        dc.lambda = lambda;
        out.emplace_back(lambda, evaluate(m, data::generate(dc, vocab), vocab, cfg));
    }
    return out;
}

std::vector<AblationRow> input_length_ablation(const std::vector<std::size_t> &sizes,
                                               const data::DatasetConfig &train_cfg,
                                               const data::DatasetConfig &test_cfg,
                                               const model::ProseConfig &model_cfg, const TrainConfig &tcfg,
                                               const symbolic::Vocabulary &vocab,
                                               const std::function<void(const std::string &)> &log) {
    std::vector<AblationRow> rows;
    EvalConfig ecfg;
    ecfg.symbols = false;
    for (std::size_t n : sizes) {
        auto trc = train_cfg, tec = test_cfg;
        trc.input_points = tec.input_points = n;
        const auto train_set = data::generate(trc, vocab);
        const auto test_set = data::generate(tec, vocab);
        AblationRow row;
        row.input_points = n;
        for (bool multimodal : {true, false}) {
            auto mc = model_cfg;
            mc.multimodal = multimodal;
            model::Prose m(mc);
            TrainHooks hooks;
            if (log)
                hooks.log = [&](const std::string &msg) {
                    log("[" + std::to_string(n) + (multimodal ? " points, multimodal] " : " points, data-only] ") + msg);
                };
            train(m, train_set, {}, tcfg, hooks);
            const double err = evaluate(m, test_set, vocab, ecfg).error_2_6;
            (multimodal ? row.multimodal_error : row.data_only_error) = err;
            (multimodal ? row.multimodal_params : row.data_only_params) = m.params().scalar_count();
        }
        rows.push_back(row);
    }
    return rows;
}

void write_reports_csv(const std::vector<std::pair<std::string, MetricsReport>> &rows,
                       const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "setting,samples,relative_error_2_4_percent,relative_error_2_6_percent,valid_expressions_percent,"
           "expression_error_percent,decode_then_integrate_error_percent\n";
    char buf[512];
    for (const auto &[name, r] : rows) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%.4f,%.4f,", name.c_str(), r.samples, 100 * r.error_2_4,
                      100 * r.error_2_6);
        out << buf;
        if (r.symbols) {
            std::snprintf(buf, sizeof buf, "%.4f,", r.validity_percent());
            out << buf;
            if (r.valid) {
                std::snprintf(buf, sizeof buf, "%.4f", 100 * r.expression_error);
                out << buf;
            }
        } else {
            out << ',';
        }
        out << ',';
        if (r.integrated && r.integrated_ok) {
            std::snprintf(buf, sizeof buf, "%.4f", 100 * r.integrate_error);
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace prose::train
