#include "prose/run_config.hpp"

#include <fstream>

#include "prose/errors.hpp"
#include "prose/rng.hpp"

namespace prose {

const char *split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(const std::string &name) {
    for (auto s : {Split::Train, Split::Val, Split::Test})
        if (name == split_name(s)) return s;
    throw Error("unknown split '" + name + "'");
}

train::TrainConfig RunConfig::desk_train() {
    train::TrainConfig c;
    c.lr = 1e-3;
    c.batch_size = 4;
    c.epochs = 10;
    return c;
}

data::DatasetConfig RunConfig::split(Split s) const {
    auto c = dataset;
    c.seed = child_seed(seed, 0xda7a, static_cast<std::uint64_t>(s));
    if (s == Split::Val) c.instances_per_family = val_instances_per_family;
    if (s == Split::Test) c.instances_per_family = test_instances_per_family;
    return c;
}

model::ProseConfig RunConfig::model_config() const {
    auto c = model;
    c.d_max = static_cast<int>(dataset.d_max);
    c.init_seed = child_seed(seed, 0x1417);
    return c;
}

train::TrainConfig RunConfig::train_config() const {
    auto c = train;
    c.seed = child_seed(seed, 0x7a1);
    return c;
}

nlohmann::json RunConfig::to_json() const {
    auto d = data::to_json(dataset);
    d.erase("seed");
    auto m = model::to_json(model);
    m.erase("init_seed");
    m.erase("d_max");
    auto t = train::to_json(train);
    t.erase("seed");
    return {{"seed", seed},
            {"dataset", d},
            {"val_instances_per_family", val_instances_per_family},
            {"test_instances_per_family", test_instances_per_family},
            {"model", m},
            {"train", t}};
}

std::uint64_t RunConfig::hash() const { return data::fnv1a(to_json().dump()); }

RunConfig run_config_from_json(const nlohmann::json &j) {
    RunConfig c;
    for (const auto &[key, v] : j.items()) {
        if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "dataset") {
            // Without a mode the keys refine the default desk dataset.
            auto merged = v;
            if (!v.contains("mode")) {
                merged = data::to_json(c.dataset);
                merged.update(v);
            }
            c.dataset = data::dataset_config_from_json(merged);
        }
        else if (key == "val_instances_per_family") c.val_instances_per_family = v.get<std::size_t>();
        else if (key == "test_instances_per_family") c.test_instances_per_family = v.get<std::size_t>();
        else if (key == "model") {
            auto m = v;
            if (!m.contains("preset")) m["preset"] = "desk";
            c.model = model::model_config_from_json(m);
        } else if (key == "train") {
            auto merged = train::to_json(RunConfig::desk_train());
            merged.update(v);
            c.train = train::train_config_from_json(merged);
        } else {
            throw Error("unknown run config key '" + key + "'");
        }
    }
    c.model_config().validate();
    c.train.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw Error(path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace prose
