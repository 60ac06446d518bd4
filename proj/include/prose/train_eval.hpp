#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prose/dataset.hpp"
#include "prose/integrate.hpp"
#include "prose/model.hpp"

namespace prose::train {

using model::Mat;

struct TrainConfig {
    double alpha = 6.0;  // data loss weight
    double beta = 1.0;   // symbol loss weight
    double lr = 1e-4;
    double weight_decay = 1e-4;
    double warmup_fraction = 0.10;
    double clip_norm = 1.0;
    std::size_t batch_size = 16;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig &cfg);
TrainConfig train_config_from_json(const nlohmann::json &j);
std::uint64_t config_hash(const TrainConfig &cfg);

struct LossParts {
    double total = 0.0;
    double data = 0.0;
    double symbol = 0.0;
};

/// alpha * L_d + beta * L_s for one sample on `t`; the symbol path is skipped
/// when beta == 0 or the model is data-only.
struct SampleLoss {
    nn::Var total;
    LossParts parts;
};
SampleLoss sample_loss(nn::Tape &t, const model::Prose &m, const data::Sample &s, double alpha, double beta);

/// Mean losses over a dataset with teacher forcing and no gradients.
LossParts dataset_loss(const model::Prose &m, const std::vector<data::Sample> &samples, double alpha, double beta);

struct CurvePoint {
    std::int64_t step = 0;
    LossParts train;                 // batch mean
    std::optional<LossParts> val;    // present at epoch ends
};

struct TrainResult {
    std::vector<CurvePoint> curve;
    std::vector<double> epoch_train_loss;  // mean batch loss per epoch
    std::vector<double> epoch_val_loss;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    double seconds = 0.0;
};

struct TrainHooks {
    std::function<void(const std::string &)> log;
    std::filesystem::path checkpoint;  // best-by-validation model, if set
    std::uint64_t vocab_hash = 0;
    std::uint64_t run_hash = 0;
};

/// AdamW with warmup + inverse-square-root decay, validation once per epoch
/// and the best-validation parameters restored at the end. Throws
/// NonFiniteLoss after restoring (and saving, if configured) the last good
/// parameters.
TrainResult train(model::Prose &m, const std::vector<data::Sample> &train_set,
                  const std::vector<data::Sample> &val_set, const TrainConfig &cfg, const TrainHooks &hooks = {});

/// step,train,val,train_data,train_symbol; val is empty between epochs.
void write_loss_curve(const TrainResult &r, const std::filesystem::path &path);

// Evaluation ------------------------------------------------------------------

struct EvalConfig {
    bool symbols = true;
    bool decode_then_integrate = false;
    int max_len = 0;  // 0 uses the model's max_symbol_len
    int expression_points = 50;
    std::uint64_t seed = 0;
    integrate::SolverConfig solver;
};

nlohmann::json to_json(const EvalConfig &cfg);

struct MetricsReport {
    std::size_t samples = 0;
    double error_2_4 = 0.0;  // mean relative L2, first half of the label grid
    double error_2_6 = 0.0;  // whole label grid
    // Symbol outputs; the four counts sum to `samples` when symbols ran.
    bool symbols = false;
    std::size_t valid = 0;
    std::size_t invalid = 0;
    std::size_t truncated = 0;
    std::size_t domain_errored = 0;  // parse, but the velocity error is undefined at every point
    double expression_error = 0.0;  // mean over `valid`
    // Decode-then-integrate, over outputs that parse and integrate.
    bool integrated = false;
    std::size_t integrated_ok = 0;
    double integrate_error = 0.0;
    double data_error_same_subset = 0.0;

    double validity_percent() const;
    nlohmann::json to_json() const;
    bool operator==(const MetricsReport &) const = default;
};

/// Per-sample |pred - label|_F / |label|_F over the masked columns of rows
/// [begin, end).
double relative_l2(const Mat &pred, const Mat &label, const std::vector<std::uint8_t> &mask, Eigen::Index begin,
                   Eigen::Index end);

enum class SymbolOutcome { Valid, Invalid, Truncated, DomainErrored };

/// Scores one decoded sequence against the sample's target.
SymbolOutcome score_symbols(const model::GreedyResult &out, const data::Sample &s, const symbolic::Vocabulary &vocab,
                            int points, std::uint64_t seed, double *expr_error);

/// Integrates the parsed output from the clean state at the end of the input
/// window over the label times; relative L2 against the labels. nullopt when
/// the output does not parse or the solver fails.
std::optional<double> decode_then_integrate(const model::GreedyResult &out, const data::Sample &s,
                                            const symbolic::Vocabulary &vocab, const integrate::SolverConfig &solver);

MetricsReport evaluate(const model::Prose &m, const std::vector<data::Sample> &samples,
                       const symbolic::Vocabulary &vocab, const EvalConfig &cfg = {});

/// Test sets regenerated at each lambda with the same test seed.
std::vector<std::pair<double, MetricsReport>> ood_sweep(const model::Prose &m, const data::DatasetConfig &test_cfg,
                                                        const std::vector<double> &lambdas,
                                                        const symbolic::Vocabulary &vocab, const EvalConfig &cfg);

struct AblationRow {
    std::size_t input_points = 0;
    double multimodal_error = 0.0;  // [2,6] relative L2 on the common label grid
    double data_only_error = 0.0;
    std::size_t multimodal_params = 0;
    std::size_t data_only_params = 0;
};

/// For each input grid size, trains a multimodal and a data-only model on
/// identical data and budget and evaluates both on the same label grid.
std::vector<AblationRow> input_length_ablation(const std::vector<std::size_t> &sizes,
                                               const data::DatasetConfig &train_cfg,
                                               const data::DatasetConfig &test_cfg,
                                               const model::ProseConfig &model_cfg, const TrainConfig &tcfg,
                                               const symbolic::Vocabulary &vocab,
                                               const std::function<void(const std::string &)> &log = {});

void write_reports_csv(const std::vector<std::pair<std::string, MetricsReport>> &rows,
                       const std::filesystem::path &path);

}  // namespace prose::train
