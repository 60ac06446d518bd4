// Python bindings for the core library.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "prose/errors.hpp"
#include "prose/run_config.hpp"
#include "prose/selftest.hpp"
#include "prose/symbolic/polish.hpp"

namespace py = pybind11;
using namespace prose;

namespace {

const symbolic::Vocabulary &vocab() {
    static const symbolic::Vocabulary v;
    return v;
}

nlohmann::json parse_json(const std::string &text) { return text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text); }

py::object to_python(const nlohmann::json &j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multimodal operator and equation learning for dynamical systems";

    auto base = py::register_exception<Error>(m, "ProseError", PyExc_RuntimeError);
    py::register_exception<SchemaMismatch>(m, "SchemaMismatch", base.ptr());
    py::register_exception<CorruptRecord>(m, "CorruptRecord", base.ptr());
    py::register_exception<UnknownToken>(m, "UnknownToken", base.ptr());
    py::register_exception<NonFiniteLoss>(m, "NonFiniteLoss", base.ptr());

    m.def("vocabulary_size", [] { return vocab().size(); });
    m.def("encode_words", [](const std::string &text) { return symbolic::from_words(text, vocab()); },
          "Token ids of a space-separated word sequence");
    m.def("decode_words", [](const symbolic::TokenSeq &t) { return symbolic::to_words(t, vocab()); });
    m.def("infix", [](const symbolic::TokenSeq &t) { return symbolic::to_infix(symbolic::from_polish(t, vocab())); },
          "Parses a token sequence and renders each component in infix");

    py::class_<data::Sample>(m, "Sample")
        .def_readonly("family", &data::Sample::family)
        .def_readonly("dim", &data::Sample::dim)
        .def_readonly("seed", &data::Sample::seed)
        .def_readonly("input_times", &data::Sample::input_times)
        .def_readonly("input_values", &data::Sample::input_values)
        .def_readonly("mask", &data::Sample::mask)
        .def_readonly("query_times", &data::Sample::query_times)
        .def_readonly("labels", &data::Sample::labels)
        .def_readonly("symbol_input", &data::Sample::symbol_input)
        .def_readonly("symbol_target", &data::Sample::symbol_target)
        .def_readonly("initial_state", &data::Sample::initial_state)
        .def_readonly("last_input_state", &data::Sample::last_input_state)
        .def("__eq__", [](const data::Sample &a, const data::Sample &b) { return a == b; })
        .def("__repr__", [](const data::Sample &s) {
            return "<Sample " + s.family + " dim=" + std::to_string(s.dim) + ">";
        });

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init([](const std::string &text) { return run_config_from_json(parse_json(text)); }),
             py::arg("json") = "", "Builds a run config from JSON text; empty text gives the defaults")
        .def_readwrite("seed", &RunConfig::seed)
        .def("to_json", [](const RunConfig &c) { return c.to_json().dump(); })
        .def("hash", &RunConfig::hash)
        .def("split_size", [](const RunConfig &c, const std::string &s) { return c.split(parse_split(s)).size(); });

    m.def(
        "generate",
        [](const RunConfig &c, const std::string &split, std::size_t workers) {
            py::gil_scoped_release release;
            return data::generate(c.split(parse_split(split)), vocab(), workers);
        },
        py::arg("config"), py::arg("split") = "train", py::arg("workers") = 1);
    m.def("write_dataset", [](const std::vector<data::Sample> &s, const std::filesystem::path &p,
                              std::uint64_t hash) { data::write_dataset(s, p, hash); });
    m.def("read_dataset", [](const std::filesystem::path &p) {
        data::DatasetHeader h;
        auto s = data::read_dataset(p, &h);
        return py::make_tuple(s, h.config_hash);
    });

    py::class_<model::Prose>(m, "Model")
        .def(py::init([](const RunConfig &c) { return model::Prose(c.model_config()); }))
        .def_static("load", [](const std::filesystem::path &p) { return model::load_checkpoint(p, vocab().hash()); })
        .def("save", [](const model::Prose &mdl, const std::filesystem::path &p,
                        std::uint64_t run_hash) { model::save_checkpoint(mdl, p, vocab().hash(), run_hash); },
             py::arg("path"), py::arg("run_hash") = 0)
        .def_property_readonly("parameter_count", [](const model::Prose &mdl) { return mdl.params().scalar_count(); })
        .def_property_readonly("multimodal", [](const model::Prose &mdl) { return mdl.config().multimodal; })
        .def("predict", [](const model::Prose &mdl, const data::Sample &s) { return mdl.predict(s); })
        .def("predict_at", [](const model::Prose &mdl, const data::Sample &s,
                              const std::vector<double> &t) { return mdl.predict(s, t); })
        .def("generate_symbols", [](const model::Prose &mdl, const data::Sample &s, int max_len) {
            const auto r = mdl.generate_symbols(s, max_len);
            return py::make_tuple(r.tokens, r.truncated);
        }, py::arg("sample"), py::arg("max_len") = 0)
        .def("fusion_attention", &model::Prose::fusion_attention);

    m.def(
        "train",
        [](model::Prose &mdl, const std::vector<data::Sample> &train_set, const std::vector<data::Sample> &val_set,
           const RunConfig &c) {
            train::TrainResult r;
            {
                py::gil_scoped_release release;
                r = train::train(mdl, train_set, val_set, c.train_config());
            }
            py::dict out;
            out["epoch_train_loss"] = r.epoch_train_loss;
            out["epoch_val_loss"] = r.epoch_val_loss;
            out["best_epoch"] = r.best_epoch;
            out["seconds"] = r.seconds;
            return out;
        },
        py::arg("model"), py::arg("train_set"), py::arg("val_set"), py::arg("config"));

    m.def(
        "evaluate",
        [](const model::Prose &mdl, const std::vector<data::Sample> &samples, bool symbols, bool integrate,
           int max_len) {
            train::EvalConfig e;
            e.symbols = symbols;
            e.decode_then_integrate = integrate;
            e.max_len = max_len;
            train::MetricsReport r;
            {
                py::gil_scoped_release release;
                r = train::evaluate(mdl, samples, vocab(), e);
            }
            return to_python(r.to_json());
        },
        py::arg("model"), py::arg("samples"), py::arg("symbols") = true, py::arg("integrate") = false,
        py::arg("max_len") = 0);

    m.def("selftest", [] {
        std::vector<std::tuple<std::string, bool, std::string>> out;
        for (const auto &c : run_selftest()) out.emplace_back(c.name, c.ok, c.detail);
        return out;
    });
}
