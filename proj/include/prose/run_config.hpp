#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "prose/dataset.hpp"
#include "prose/model.hpp"
#include "prose/train_eval.hpp"

namespace prose {

enum class Split { Train, Val, Test };
const char *split_name(Split s);
Split parse_split(const std::string &name);

/// Everything a run needs, derived from one master seed. The resolved JSON
/// (every field explicit) is hashed into each artifact the run writes.
struct RunConfig {
    std::uint64_t seed = 0;
    data::DatasetConfig dataset = data::DatasetConfig::preset(data::ExperimentMode::Skeleton);
    std::size_t val_instances_per_family = 20;
    std::size_t test_instances_per_family = 20;
    model::ProseConfig model = model::ProseConfig::desk();
    train::TrainConfig train = desk_train();

    /// Learning rate and batch size tuned for the desk model.
    static train::TrainConfig desk_train();

    /// Dataset config of a split: its own seed and instance count.
    data::DatasetConfig split(Split s) const;
    /// Model config with the init seed derived from the master seed.
    model::ProseConfig model_config() const;
    /// Train config with the shuffle seed derived from the master seed.
    train::TrainConfig train_config() const;

    nlohmann::json to_json() const;
    std::uint64_t hash() const;
};

/// Keys: seed, dataset (with optional "mode"), model (with optional
/// "preset"), train, val_instances_per_family, test_instances_per_family.
/// Missing keys keep their defaults; unknown keys throw.
RunConfig run_config_from_json(const nlohmann::json &j);
RunConfig load_run_config(const std::filesystem::path &path);

}  // namespace prose
