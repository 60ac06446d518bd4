#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "prose/errors.hpp"
#include "prose/symbolic/polish.hpp"
#include "prose/train_eval.hpp"

using namespace prose;
using namespace prose::train;

namespace {

const symbolic::Vocabulary &vocab() {
    static const symbolic::Vocabulary v;
    return v;
}

data::DatasetConfig small(data::ExperimentMode mode, std::size_t instances, std::size_t ics, std::uint64_t seed) {
    auto cfg = data::DatasetConfig::preset(mode);
    cfg.instances_per_family = instances;
    cfg.ics_per_instance = ics;
    cfg.seed = seed;
    return cfg;
}

model::ProseConfig tiny() {
    model::ProseConfig c;
    c.width = 16;
    c.heads = 2;
    c.ffn = 24;
    c.data_encoder_layers = 1;
    c.symbol_encoder_layers = 1;
    c.fusion_layers = 1;
    c.data_decoder_layers = 1;
    c.symbol_decoder_layers = 1;
    c.init_seed = 5;
    return c;
}

bool starts_with(const std::string &s, const std::string &prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST_CASE("train config json round trip and validation") {
    TrainConfig c;
    c.lr = 3e-4;
    c.batch_size = 8;
    c.seed = 99;
    const auto back = train_config_from_json(to_json(c));
    CHECK(back.lr == c.lr);
    CHECK(back.batch_size == 8);
    CHECK(back.seed == 99);
    CHECK(config_hash(back) == config_hash(c));
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK_THROWS_AS(train_config_from_json({{"no_such_key", 1}}), Error);
}

TEST_CASE("combined loss is the weighted sum of its parts") {
    const auto samples = data::generate(small(data::ExperimentMode::Skeleton, 1, 1, 3), vocab());
    model::Prose m(tiny());
    for (const auto &s : samples) {
        nn::Tape t(false);
        const auto r = sample_loss(t, m, s, 6.0, 1.0);
        CHECK(r.parts.data > 0.0);
        CHECK(r.parts.symbol > 0.0);
        CHECK(r.parts.total == doctest::Approx(6.0 * r.parts.data + 1.0 * r.parts.symbol).epsilon(1e-12));
    }
}

TEST_CASE("zero symbol weight leaves the symbol decoder untouched") {
    const auto samples = data::generate(small(data::ExperimentMode::Skeleton, 1, 1, 3), vocab());
    model::Prose m(tiny());
    m.params().zero_grad();
    nn::Tape t(true);
    const auto r = sample_loss(t, m, samples[0], 6.0, 0.0);
    CHECK(r.parts.symbol == 0.0);
    CHECK(r.parts.total == doctest::Approx(6.0 * r.parts.data).epsilon(1e-14));
    t.backward(r.total);
    std::size_t symbol_params = 0;
    double data_grad = 0.0;
    for (std::size_t i = 0; i < m.params().size(); ++i) {
        const auto &p = m.params()[i];
        if (starts_with(p.name, "symbol_decoder") || starts_with(p.name, "symbol_head")) {
            ++symbol_params;
            CHECK_MESSAGE(p.grad.cwiseAbs().maxCoeff() == 0.0, p.name);
        } else if (starts_with(p.name, "data_head")) {
            data_grad += p.grad.squaredNorm();
        }
    }
    CHECK(symbol_params > 0);
    CHECK(data_grad > 0.0);
}

TEST_CASE("a short run lowers the training loss") {
    const auto samples = data::generate(small(data::ExperimentMode::Known, 8, 4, 17), vocab(), 0, 64);
    REQUIRE(samples.size() == 64);
    model::Prose m(tiny());
    TrainConfig cfg;
    cfg.lr = 3e-3;
    cfg.batch_size = 4;
    cfg.epochs = 4;
    cfg.seed = 1;
    const auto before = dataset_loss(m, samples, cfg.alpha, cfg.beta);
    const auto res = train::train(m, samples, {}, cfg);
    CHECK(res.curve.size() == 64);
    CHECK(res.curve.size() >= 50);
    const auto after = dataset_loss(m, samples, cfg.alpha, cfg.beta);
    CHECK(after.total < before.total);
    CHECK(after.data < before.data);
    CHECK(after.symbol < before.symbol);
    CHECK(res.epoch_train_loss.size() == 4);
    CHECK(res.epoch_train_loss.back() < res.epoch_train_loss.front());
}

TEST_CASE("identical seeds give identical loss curves") {
    const auto train_set = data::generate(small(data::ExperimentMode::Skeleton, 2, 2, 21), vocab());
    const auto val_set = data::generate(small(data::ExperimentMode::Skeleton, 1, 1, 22), vocab());
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch_size = 3;
    cfg.epochs = 2;
    cfg.seed = 8;
    model::Prose a(tiny()), b(tiny());
    const auto ra = train::train(a, train_set, val_set, cfg);
    const auto rb = train::train(b, train_set, val_set, cfg);
    REQUIRE(ra.curve.size() == rb.curve.size());
    for (std::size_t i = 0; i < ra.curve.size(); ++i) {
        CHECK(ra.curve[i].train.total == rb.curve[i].train.total);
        CHECK(ra.curve[i].val.has_value() == rb.curve[i].val.has_value());
    }
    CHECK(ra.epoch_val_loss == rb.epoch_val_loss);
    for (std::size_t i = 0; i < a.params().size(); ++i) CHECK(a.params()[i].value == b.params()[i].value);

    // A different shuffle seed changes the trajectory.
    cfg.seed = 9;
    model::Prose c(tiny());
    const auto rc = train::train(c, train_set, val_set, cfg);
    CHECK(rc.curve.back().train.total != ra.curve.back().train.total);

    const auto path = std::filesystem::temp_directory_path() / "prose_test_curve.csv";
    write_loss_curve(ra, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,train,val,train_data,train_symbol");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == ra.curve.size());
    std::filesystem::remove(path);
}

TEST_CASE("best validation parameters are restored and checkpointed") {
    const auto train_set = data::generate(small(data::ExperimentMode::Skeleton, 2, 2, 31), vocab());
    const auto val_set = data::generate(small(data::ExperimentMode::Skeleton, 1, 1, 32), vocab());
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch_size = 4;
    cfg.epochs = 3;
    const auto path = std::filesystem::temp_directory_path() / "prose_test_best.ckpt";
    model::Prose m(tiny());
    const auto res = train::train(m, train_set, val_set, cfg, {.checkpoint = path, .vocab_hash = vocab().hash()});
    CHECK(res.best_val_loss == *std::min_element(res.epoch_val_loss.begin(), res.epoch_val_loss.end()));
    CHECK(dataset_loss(m, val_set, cfg.alpha, cfg.beta).total == doctest::Approx(res.best_val_loss).epsilon(1e-12));
    const auto loaded = model::load_checkpoint(path, vocab().hash());
    for (std::size_t i = 0; i < m.params().size(); ++i) CHECK(loaded.params()[i].value == m.params()[i].value);
    std::filesystem::remove(path);
}

TEST_CASE("non-finite loss stops training with the last good parameters") {
    auto samples = data::generate(small(data::ExperimentMode::Skeleton, 1, 2, 41), vocab());
    samples[3].labels(5, 0) = std::numeric_limits<double>::quiet_NaN();
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.epochs = 1;
    model::Prose m(tiny());
    const auto path = std::filesystem::temp_directory_path() / "prose_test_nan.ckpt";
    CHECK_THROWS_AS(train::train(m, samples, {}, cfg, {.checkpoint = path, .vocab_hash = vocab().hash()}), NonFiniteLoss);
    for (std::size_t i = 0; i < m.params().size(); ++i) CHECK(m.params()[i].value.allFinite());
    REQUIRE(std::filesystem::exists(path));
    const auto loaded = model::load_checkpoint(path, vocab().hash());
    for (std::size_t i = 0; i < m.params().size(); ++i) CHECK(loaded.params()[i].value == m.params()[i].value);
    std::filesystem::remove(path);
}

TEST_CASE("relative error ignores padded columns and is zero on exact labels") {
    const auto samples = data::generate(small(data::ExperimentMode::UnknownMultiD, 1, 1, 51), vocab());
    for (const auto &s : samples) {
        const auto n = s.labels.rows();
        CHECK(relative_l2(s.labels, s.labels, s.mask, 0, n) == 0.0);
        Mat pred = s.labels;
        for (Eigen::Index j = s.dim; j < pred.cols(); ++j) pred.col(j).setConstant(1e6);
        CHECK(relative_l2(pred, s.labels, s.mask, 0, n) == 0.0);
        pred = s.labels * 1.1;
        CHECK(relative_l2(pred, s.labels, s.mask, 0, n) == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(relative_l2(pred, s.labels, s.mask, 0, n / 2) == doctest::Approx(0.1).epsilon(1e-12));
    }
}

TEST_CASE("symbol scoring on an echo stub matches a hand count") {
    const auto known = data::generate(small(data::ExperimentMode::Known, 1, 4, 61), vocab());
    const auto skeleton = data::generate(small(data::ExperimentMode::Skeleton, 1, 4, 62), vocab());
    REQUIRE(known.size() == 12);
    REQUIRE(skeleton.size() == 12);

    struct Case {
        const data::Sample *sample;
        model::GreedyResult out;
    };
    std::vector<Case> cases;
    // 8 echoes of a correct guess: valid with zero expression error.
    for (std::size_t i = 0; i < 8; ++i) cases.push_back({&known[i], {known[i].symbol_input, false}});
    // 4 echoes of a guess with coefficient placeholders: not a concrete system.
    for (std::size_t i = 0; i < 4; ++i) cases.push_back({&skeleton[i], {skeleton[i].symbol_input, false}});
    // 4 sequences missing their last leaf: do not parse.
    for (std::size_t i = 8; i < 12; ++i) {
        auto tokens = known[i].symbol_input;
        tokens.pop_back();
        cases.push_back({&known[i], {tokens, false}});
    }
    // 2 runs that hit the length limit and 2 empty outputs.
    cases.push_back({&known[0], {known[0].symbol_input, true}});
    cases.push_back({&known[1], {known[1].symbol_input, true}});
    cases.push_back({&known[2], {{}, false}});
    cases.push_back({&known[3], {{}, false}});
    REQUIRE(cases.size() == 20);

    MetricsReport r;
    r.samples = cases.size();
    r.symbols = true;
    for (const auto &c : cases) {
        double e = -1.0;
        switch (score_symbols(c.out, *c.sample, vocab(), 50, 7, &e)) {
            case SymbolOutcome::Valid:
                ++r.valid;
                CHECK(e < 1e-14);
                break;
            case SymbolOutcome::Invalid: ++r.invalid; break;
            case SymbolOutcome::Truncated: ++r.truncated; break;
            case SymbolOutcome::DomainErrored: ++r.domain_errored; break;
        }
    }
    CHECK(r.valid == 8);
    CHECK(r.invalid == 10);
    CHECK(r.truncated == 2);
    CHECK(r.domain_errored == 0);
    CHECK(r.validity_percent() == doctest::Approx(40.0));
}

TEST_CASE("symbol scoring edge cases") {
    const auto known = data::generate(small(data::ExperimentMode::Known, 1, 1, 71), vocab());
    const auto &s = known[0];
    REQUIRE(s.dim == 3);

    // Defined nowhere: u/(u - u) in every component.
    const auto nowhere = symbolic::from_words("div u_1 sub u_1 u_1 | div u_2 sub u_2 u_2 | div u_3 sub u_3 u_3", vocab());
    double e = 0.0;
    CHECK(score_symbols({nowhere, false}, s, vocab(), 50, 1, &e) == SymbolOutcome::DomainErrored);

    // Right syntax, wrong dimension.
    const auto two = symbolic::from_words("u_2 | u_1", vocab());
    CHECK(score_symbols({two, false}, s, vocab(), 50, 1, &e) == SymbolOutcome::Invalid);

    // A parseable but wrong system has a positive error.
    const auto wrong = symbolic::from_words("u_2 | u_3 | u_1", vocab());
    CHECK(score_symbols({wrong, false}, s, vocab(), 50, 1, &e) == SymbolOutcome::Valid);
    CHECK(e > 0.0);
}

TEST_CASE("decode-then-integrate on the true system reaches the label noise level") {
    auto cfg = small(data::ExperimentMode::Known, 1, 2, 81);
    cfg.families = {"thomas"};
    const auto samples = data::generate(cfg, vocab());
    for (const auto &s : samples) {
        const auto err = decode_then_integrate({s.symbol_target, false}, s, vocab(), cfg.solver);
        REQUIRE(err.has_value());
        CHECK(*err < 0.05);
        CHECK(*err > 0.0);
        CHECK_FALSE(decode_then_integrate({{}, false}, s, vocab(), cfg.solver).has_value());
        CHECK_FALSE(decode_then_integrate({s.symbol_target, true}, s, vocab(), cfg.solver).has_value());
    }
}

TEST_CASE("evaluation is deterministic and its counts cover every sample") {
    const auto samples = data::generate(small(data::ExperimentMode::Skeleton, 1, 2, 91), vocab());
    model::Prose m(tiny());
    EvalConfig ecfg;
    ecfg.max_len = 12;
    ecfg.decode_then_integrate = true;
    const auto a = evaluate(m, samples, vocab(), ecfg);
    const auto b = evaluate(m, samples, vocab(), ecfg);
    CHECK(a == b);
    CHECK(a.samples == samples.size());
    CHECK(a.valid + a.invalid + a.truncated + a.domain_errored == samples.size());
    CHECK(a.error_2_6 > 0.0);
    CHECK(std::isfinite(a.error_2_4));
    const auto j = a.to_json();
    CHECK(j.contains("valid_expressions_percent"));
    CHECK(j["relative_error_2_6_percent"].get<double>() == doctest::Approx(100.0 * a.error_2_6));

    ecfg.symbols = false;
    const auto data_only = evaluate(m, samples, vocab(), ecfg);
    CHECK_FALSE(data_only.symbols);
    CHECK(data_only.error_2_6 == a.error_2_6);
    CHECK_FALSE(data_only.to_json().contains("valid_expressions_percent"));
}

TEST_CASE("out-of-distribution sweep") {
    auto test_cfg = small(data::ExperimentMode::Skeleton, 1, 1, 101);
    model::Prose m(tiny());
    EvalConfig ecfg;
    ecfg.max_len = 8;
    const auto single = ood_sweep(m, test_cfg, {0.10}, vocab(), ecfg);
    REQUIRE(single.size() == 1);
    CHECK(single[0].first == 0.10);
    CHECK(single[0].second == evaluate(m, data::generate(test_cfg, vocab()), vocab(), ecfg));

    const auto sweep = ood_sweep(m, test_cfg, {0.10, 0.20}, vocab(), ecfg);
    REQUIRE(sweep.size() == 2);
    CHECK(sweep[0].second == single[0].second);
    CHECK_FALSE(sweep[1].second == sweep[0].second);
}

TEST_CASE("input-length ablation at toy scale") {
    auto train_cfg = small(data::ExperimentMode::Skeleton, 1, 2, 111);
    auto test_cfg = small(data::ExperimentMode::Skeleton, 1, 1, 112);
    TrainConfig tcfg;
    tcfg.lr = 1e-3;
    tcfg.batch_size = 3;
    tcfg.epochs = 1;
    const auto rows = input_length_ablation({16, 32}, train_cfg, test_cfg, tiny(), tcfg, vocab());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].input_points == 16);
    CHECK(rows[1].input_points == 32);
    for (const auto &r : rows) {
        CHECK(std::isfinite(r.multimodal_error));
        CHECK(std::isfinite(r.data_only_error));
        CHECK(r.multimodal_params > r.data_only_params);
    }

    const auto path = std::filesystem::temp_directory_path() / "prose_test_reports.csv";
    MetricsReport rep;
    rep.samples = 3;
    write_reports_csv({{"a", rep}, {"b", rep}}, path);
    std::ifstream in(path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 3);
    std::filesystem::remove(path);
}
