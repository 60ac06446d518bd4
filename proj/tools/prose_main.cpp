// Command-line entry point: dataset generation, training, evaluation,
// prediction, OOD sweeps, input-length ablation, attention export and
// self-tests. Usage errors exit with 2, runtime errors with 1.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "prose/errors.hpp"
#include "prose/run_config.hpp"
#include "prose/selftest.hpp"
#include "prose/symbolic/polish.hpp"

using namespace prose;
namespace fs = std::filesystem;

namespace {

std::string hex(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// One JSON object per line on stderr.
void log_event(const std::string &cmd, const std::string &msg) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char ts[32];
    std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    std::cerr << nlohmann::json{{"time", ts}, {"cmd", cmd}, {"msg", msg}}.dump() << '\n';
}

struct RunOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::size_t> instances, epochs, batch_size;
    std::optional<double> lr;

    void attach(CLI::App *cmd) {
        cmd->add_option("--config", config, "Run configuration JSON")->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "Master seed (overrides the config)");
        cmd->add_option("--mode", mode, "Experiment mode: known, skeleton, unknown3d, unknown_multid");
        cmd->add_option("--instances", instances, "Training instances per family");
        cmd->add_option("--epochs", epochs, "Training epochs");
        cmd->add_option("--batch-size", batch_size, "Samples per optimizer step");
        cmd->add_option("--lr", lr, "Peak learning rate");
    }

    RunConfig resolve() const {
        nlohmann::json j = config.empty() ? nlohmann::json::object() : nlohmann::json::parse(std::ifstream(config));
        if (mode) {
            auto &d = j["dataset"];
            if (d.is_null()) d = nlohmann::json::object();
            d["mode"] = *mode;
        }
        auto cfg = run_config_from_json(j);
        if (seed) cfg.seed = *seed;
        if (instances) cfg.dataset.instances_per_family = *instances;
        if (epochs) cfg.train.epochs = *epochs;
        if (batch_size) cfg.train.batch_size = *batch_size;
        if (lr) cfg.train.lr = *lr;
        cfg.train.validate();
        return cfg;
    }
};

std::vector<data::Sample> read_checked(const fs::path &path, std::uint64_t expected, bool force, const char *what) {
    data::DatasetHeader h;
    auto samples = data::read_dataset(path, &h);
    if (h.config_hash != expected) {
        const std::string msg = std::string(what) + " " + path.string() + " was produced by run " +
                                hex(h.config_hash) + ", expected " + hex(expected);
        if (!force) throw SchemaMismatch(msg + " (use --force to override)");
        log_event("check", "warning: " + msg);
    }
    return samples;
}

void write_text(const fs::path &path, const std::string &text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

const data::Sample &pick(const std::vector<data::Sample> &samples, std::size_t index) {
    if (index >= samples.size())
        throw Error("sample index " + std::to_string(index) + " out of range (" + std::to_string(samples.size()) +
                    " records)");
    return samples[index];
}

std::string equation_block(const std::string &label, const symbolic::TokenSeq &tokens,
                           const symbolic::Vocabulary &vocab) {
    std::ostringstream out;
    out << "# " << label << " (polish): " << symbolic::to_words(tokens, vocab) << '\n';
    try {
        const auto sys = symbolic::from_polish(tokens, vocab);
        const auto infix = symbolic::to_infix(sys);
        for (std::size_t i = 0; i < infix.size(); ++i)
            out << "# " << label << " (infix): du" << i + 1 << "/dt = " << infix[i] << '\n';
    } catch (const Error &e) {
        out << "# " << label << " (infix): not a valid expression (" << e.what() << ")\n";
    }
    return out.str();
}

std::vector<double> parse_list(const std::string &text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw CLI::ValidationError("list", "bad number '" + item + "'");
    }
    if (out.empty()) throw CLI::ValidationError("list", "empty list");
    return out;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Multimodal operator and equation learning for dynamical systems"};
    app.require_subcommand(1);
    const symbolic::Vocabulary vocab;

    // gen -------------------------------------------------------------------
    RunOptions gen_run;
    std::string gen_split = "train", gen_out, gen_jsonl;
    std::size_t gen_workers = 1;
    std::optional<double> gen_lambda;
    auto *gen = app.add_subcommand("gen", "Generate a dataset split");
    gen_run.attach(gen);
    gen->add_option("--split", gen_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
    gen->add_option("--out", gen_out, "Dataset container to write")->required();
    gen->add_option("--jsonl", gen_jsonl, "Also write the records as JSON lines");
    gen->add_option("--workers", gen_workers, "Generator threads")->check(CLI::PositiveNumber);
    gen->add_option("--lambda", gen_lambda, "Coefficient range (overrides the config)");

    // train -----------------------------------------------------------------
    RunOptions train_run;
    std::string train_data, val_data, train_out, train_curve;
    bool train_force = false;
    auto *trn = app.add_subcommand("train", "Train a model");
    train_run.attach(trn);
    trn->add_option("--train", train_data, "Training split")->required()->check(CLI::ExistingFile);
    trn->add_option("--val", val_data, "Validation split")->required()->check(CLI::ExistingFile);
    trn->add_option("--out", train_out, "Checkpoint to write (best validation loss)")->required();
    trn->add_option("--curve", train_curve, "Loss curve CSV");
    trn->add_flag("--force", train_force, "Accept datasets from a different run config");

    // eval ------------------------------------------------------------------
    std::string eval_ckpt, eval_data, eval_out, eval_csv;
    bool eval_integrate = false, eval_force = false, eval_no_symbols = false;
    int eval_max_len = 0;
    auto *evl = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    evl->add_option("--ckpt", eval_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    evl->add_option("--data", eval_data, "Dataset split")->required()->check(CLI::ExistingFile);
    evl->add_option("--out", eval_out, "Metrics report JSON (stdout when omitted)");
    evl->add_option("--csv", eval_csv, "Metrics table CSV");
    evl->add_option("--max-len", eval_max_len, "Greedy decoding limit (0: model default)");
    evl->add_flag("--integrate", eval_integrate, "Also integrate the generated equations");
    evl->add_flag("--no-symbols", eval_no_symbols, "Skip symbol decoding");
    evl->add_flag("--force", eval_force, "Accept a dataset from a different run config");

    // predict ---------------------------------------------------------------
    std::string pred_ckpt, pred_sample;
    std::size_t pred_index = 0;
    int pred_max_len = 0;
    auto *prd = app.add_subcommand("predict", "Predict one sample: trajectory CSV and equations");
    prd->add_option("--ckpt", pred_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    prd->add_option("--sample", pred_sample, "Dataset container holding the sample")->required()->check(CLI::ExistingFile);
    prd->add_option("--index", pred_index, "Record index");
    prd->add_option("--max-len", pred_max_len, "Greedy decoding limit (0: model default)");

    // ood -------------------------------------------------------------------
    RunOptions ood_run;
    std::string ood_ckpt, ood_lambdas = "0.10,0.15,0.20", ood_out, ood_csv;
    int ood_max_len = 0;
    auto *ood = app.add_subcommand("ood", "Evaluate on test sets with widened coefficient ranges");
    ood_run.attach(ood);
    ood->add_option("--ckpt", ood_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    ood->add_option("--lambdas", ood_lambdas, "Comma-separated coefficient ranges");
    ood->add_option("--out", ood_out, "Report JSON (stdout when omitted)");
    ood->add_option("--csv", ood_csv, "Metrics table CSV");
    ood->add_option("--max-len", ood_max_len, "Greedy decoding limit (0: model default)");

    // ablate ----------------------------------------------------------------
    RunOptions abl_run;
    std::string abl_sizes = "16,32,64", abl_out;
    auto *abl = app.add_subcommand("ablate", "Multimodal vs data-only across input lengths");
    abl_run.attach(abl);
    abl->add_option("--sizes", abl_sizes, "Comma-separated input grid sizes");
    abl->add_option("--out", abl_out, "CSV table (stdout when omitted)");

    // attn ------------------------------------------------------------------
    std::string attn_ckpt, attn_sample, attn_out;
    std::size_t attn_index = 0;
    auto *attn = app.add_subcommand("attn", "Export fusion attention maps as CSV");
    attn->add_option("--ckpt", attn_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    attn->add_option("--sample", attn_sample, "Dataset container")->required()->check(CLI::ExistingFile);
    attn->add_option("--index", attn_index, "Record index");
    attn->add_option("--out", attn_out, "Output directory")->required();

    auto *self = app.add_subcommand("selftest", "Run the built-in oracles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            const auto run = gen_run.resolve();
            auto cfg = run.split(parse_split(gen_split));
            if (gen_lambda) cfg.lambda = *gen_lambda;
            log_event("gen", std::to_string(cfg.size()) + " " + gen_split + " records, run " + hex(run.hash()));
            const auto samples = data::generate(cfg, vocab, gen_workers);
            data::write_dataset(samples, gen_out, run.hash());
            if (!gen_jsonl.empty()) data::write_jsonl(samples, gen_jsonl, vocab);
            log_event("gen", "wrote " + gen_out);
        } else if (trn->parsed()) {
            const auto run = train_run.resolve();
            const auto train_set = read_checked(train_data, run.hash(), train_force, "training set");
            const auto val_set = read_checked(val_data, run.hash(), train_force, "validation set");
            model::Prose m(run.model_config());
            log_event("train", std::to_string(m.params().scalar_count()) + " parameters, " +
                                   std::to_string(train_set.size()) + " training samples, run " + hex(run.hash()));
            train::TrainHooks hooks;
            hooks.log = [](const std::string &s) { log_event("train", s); };
            hooks.checkpoint = train_out;
            hooks.vocab_hash = vocab.hash();
            hooks.run_hash = run.hash();
            const auto res = train::train(m, train_set, val_set, run.train_config(), hooks);
            if (!train_curve.empty()) train::write_loss_curve(res, train_curve);
            log_event("train", "best epoch " + std::to_string(res.best_epoch + 1) + ", checkpoint " + train_out);
        } else if (evl->parsed()) {
            model::CheckpointHeader h;
            const auto m = model::load_checkpoint(eval_ckpt, vocab.hash(), &h);
            const auto samples = read_checked(eval_data, h.run_hash, eval_force, "dataset");
            train::EvalConfig ecfg;
            ecfg.symbols = !eval_no_symbols;
            ecfg.decode_then_integrate = eval_integrate;
            ecfg.max_len = eval_max_len;
            const auto rep = train::evaluate(m, samples, vocab, ecfg);
            auto j = rep.to_json();
            j["run_hash"] = hex(h.run_hash);
            j["eval"] = train::to_json(ecfg);
            const auto text = j.dump(2) + "\n";
            if (eval_out.empty()) std::cout << text;
            else write_text(eval_out, text);
            if (!eval_csv.empty()) train::write_reports_csv({{fs::path(eval_data).stem().string(), rep}}, eval_csv);
        } else if (prd->parsed()) {
            const auto m = model::load_checkpoint(pred_ckpt, vocab.hash());
            const auto samples = data::read_dataset(pred_sample);
            const auto &s = pick(samples, pred_index);
            const model::Mat pred = m.predict(s);
            std::cout << "t";
            for (std::uint32_t j = 0; j < s.dim; ++j) std::cout << ",u" << j + 1;
            std::cout << '\n';
            std::cout.precision(10);
            for (Eigen::Index i = 0; i < pred.rows(); ++i) {
                std::cout << s.query_times[static_cast<std::size_t>(i)];
                for (Eigen::Index j = 0; j < s.dim; ++j) std::cout << ',' << pred(i, j);
                std::cout << '\n';
            }
            std::cout << equation_block("target", s.symbol_target, vocab);
            if (m.config().multimodal) {
                const auto out = m.generate_symbols(s, pred_max_len);
                std::cout << equation_block(out.truncated ? "generated, truncated" : "generated", out.tokens, vocab);
            }
        } else if (ood->parsed()) {
            const auto run = ood_run.resolve();
            model::CheckpointHeader h;
            const auto m = model::load_checkpoint(ood_ckpt, vocab.hash(), &h);
            if (h.run_hash != run.hash()) log_event("ood", "note: checkpoint comes from run " + hex(h.run_hash));
            train::EvalConfig ecfg;
            ecfg.max_len = ood_max_len;
            const auto sweep = train::ood_sweep(m, run.split(Split::Test), parse_list(ood_lambdas), vocab, ecfg);
            nlohmann::json j = nlohmann::json::array();
            std::vector<std::pair<std::string, train::MetricsReport>> rows;
            for (const auto &[lambda, rep] : sweep) {
                auto r = rep.to_json();
                r["lambda"] = lambda;
                j.push_back(r);
                char name[32];
                std::snprintf(name, sizeof name, "lambda=%.2f", lambda);
                rows.emplace_back(name, rep);
            }
            const auto text = j.dump(2) + "\n";
            if (ood_out.empty()) std::cout << text;
            else write_text(ood_out, text);
            if (!ood_csv.empty()) train::write_reports_csv(rows, ood_csv);
        } else if (abl->parsed()) {
            const auto run = abl_run.resolve();
            std::vector<std::size_t> sizes;
            for (double v : parse_list(abl_sizes)) {
                if (v < 2 || v != std::floor(v)) throw CLI::ValidationError("--sizes", "sizes must be integers >= 2");
                sizes.push_back(static_cast<std::size_t>(v));
            }
            const auto rows = train::input_length_ablation(sizes, run.split(Split::Train), run.split(Split::Test),
                                                           run.model_config(), run.train_config(), vocab,
                                                           [](const std::string &s) { log_event("ablate", s); });
            std::ostringstream out;
            out.precision(10);
            out << "input_points,multimodal_error_percent,data_only_error_percent,multimodal_params,data_only_params\n";
            for (const auto &r : rows)
                out << r.input_points << ',' << 100.0 * r.multimodal_error << ',' << 100.0 * r.data_only_error << ','
                    << r.multimodal_params << ',' << r.data_only_params << '\n';
            if (abl_out.empty()) std::cout << out.str();
            else write_text(abl_out, out.str());
        } else if (attn->parsed()) {
            const auto m = model::load_checkpoint(attn_ckpt, vocab.hash());
            if (!m.config().multimodal) throw Error("data-only models have no fusion attention");
            const auto samples = data::read_dataset(attn_sample);
            const auto files = model::export_attention(m.fusion_attention(pick(samples, attn_index)), attn_out);
            log_event("attn", "wrote " + std::to_string(files.size()) + " maps to " + attn_out);
        } else if (self->parsed()) {
            bool ok = true;
            run_selftest([&](const SelfCheck &c) {
                std::cout << (c.ok ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
                ok = ok && c.ok;
            });
            return ok ? 0 : 1;
        }
    } catch (const CLI::ValidationError &e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
