#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prose/integrate.hpp"
#include "prose/ode_dict.hpp"
#include "prose/rng.hpp"
#include "prose/symbolic/corrupt.hpp"
#include "prose/symbolic/vocabulary.hpp"

namespace prose::data {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Rows of the experiment-setting table.
enum class ExperimentMode { Known, Skeleton, Unknown3D, UnknownMultiD };

const char *mode_name(ExperimentMode m);
ExperimentMode parse_mode(const std::string &name);

struct DatasetConfig {
    std::vector<std::string> families;  // catalog identifiers
    std::size_t instances_per_family = 200;
    std::size_t ics_per_instance = 4;
    double lambda = 0.10;
    double ic_box = 2.0;
    double snr = 0.02;
    // Time layout: a base grid of `base_points` uniform points on [0, t_end];
    // the first `base_input_points` of them span the input window, the rest
    // the label window. input_points/label_points resample each window
    // uniformly and equal the base counts in the default layout.
    double t_end = 6.0;
    std::size_t base_points = 192;
    std::size_t base_input_points = 64;
    std::size_t input_points = 64;
    std::size_t label_points = 128;
    symbolic::CorruptionConfig corruption;
    std::size_t d_max = 3;
    int mantissa_len = 3;
    std::uint64_t seed = 0;
    std::size_t max_retries = 50;
    integrate::SolverConfig solver;

    std::size_t size() const { return families.size() * instances_per_family * ics_per_instance; }

    /// Families and corruption flags of an experiment row, desk-scale counts.
    static DatasetConfig preset(ExperimentMode mode);

    std::vector<double> input_times() const;
    std::vector<double> label_times() const;
};

nlohmann::json to_json(const DatasetConfig &cfg);
/// Missing keys keep their defaults; unknown keys throw.
DatasetConfig dataset_config_from_json(const nlohmann::json &j);
/// FNV-1a of the canonical JSON dump.
std::uint64_t config_hash(const DatasetConfig &cfg);
std::uint64_t fnv1a(std::string_view bytes);

/// One training/evaluation record. Values are stored padded to d_max
/// columns; mask[j] == 1 for the system's own coordinates.
struct Sample {
    std::string family;
    std::uint32_t dim = 0;
    std::uint64_t seed = 0;
    std::vector<double> input_times;
    Matrix input_values;  // input_times.size() x d_max, noisy
    std::vector<std::uint8_t> mask;
    std::vector<double> query_times;
    Matrix labels;  // query_times.size() x d_max, noisy
    symbolic::TokenSeq symbol_input;   // possibly corrupted guess
    symbolic::TokenSeq symbol_target;  // ground truth
    std::vector<double> initial_state;     // clean u(0)
    std::vector<double> last_input_state;  // clean u(input_times.back())

    std::size_t d_max() const { return mask.size(); }
    bool operator==(const Sample &) const = default;
};

/// Sample plus the clean trajectory it was derived from (in-process only).
struct GeneratedSample {
    Sample sample;
    integrate::Trajectory clean;  // on input_times ++ query_times, true dims
    symbolic::SystemExpr system;
};

/// ũ = u + σ·η with η ~ N(0, I) and σ chosen so that σ‖η‖₂/‖u‖₂ = snr over the
/// whole value tensor. snr = 0 is the identity; throws ZeroSignal when
/// ‖u‖₂ = 0 and snr > 0.
integrate::Trajectory add_noise(const integrate::Trajectory &traj, double snr, Rng &rng);

/// Zero-pads the value columns to d_max. Throws DimensionTooLarge.
Sample pad_to_dim(const Sample &s, std::size_t d_max);

/// Full pipeline for one record: sample the instance, integrate, split,
/// add noise, corrupt the symbolic guess, tokenize and pad. Solver failures
/// are retried with fresh draws up to cfg.max_retries times, then
/// GenerationExhausted. The record is a function of (cfg, index) only.
GeneratedSample make_sample(const DatasetConfig &cfg, std::size_t index, const symbolic::Vocabulary &vocab);

/// Samples [begin, begin + count) using `workers` threads; output order is
/// index order regardless of the worker count.
std::vector<Sample> generate(const DatasetConfig &cfg, const symbolic::Vocabulary &vocab, std::size_t begin,
                             std::size_t count, std::size_t workers = 1);
inline std::vector<Sample> generate(const DatasetConfig &cfg, const symbolic::Vocabulary &vocab,
                                    std::size_t workers = 1) {
    return generate(cfg, vocab, 0, cfg.size(), workers);
}

// ---------------------------------------------------------------------------
// Container file: 8-byte magic "PROSEDS\0", u32 version, u64 config hash,
// u64 record count, then length-prefixed records (u64 byte length + payload).
// All integers and floats little-endian; floats are IEEE 8-byte, token ids
// 4-byte signed. See README for the payload field order.

inline constexpr std::uint32_t kDatasetVersion = 1;

struct DatasetHeader {
    std::uint32_t version = kDatasetVersion;
    std::uint64_t config_hash = 0;
    std::uint64_t record_count = 0;
};

class DatasetWriter {
   public:
    DatasetWriter(const std::filesystem::path &path, std::uint64_t config_hash);
    ~DatasetWriter();
    DatasetWriter(const DatasetWriter &) = delete;
    DatasetWriter &operator=(const DatasetWriter &) = delete;

    void write(const Sample &s);
    /// Patches the record count into the header; called by the destructor.
    void close();

   private:
    std::ofstream out_;
    std::uint64_t count_ = 0;
    bool closed_ = false;
};

class DatasetReader {
   public:
    /// Throws SchemaMismatch on a foreign magic or a different version.
    explicit DatasetReader(const std::filesystem::path &path);

    const DatasetHeader &header() const { return header_; }
    /// Next record, or nullopt after the last one. Throws CorruptRecord.
    std::optional<Sample> next();

   private:
    std::ifstream in_;
    DatasetHeader header_;
    std::uint64_t read_ = 0;
};

void write_dataset(const std::vector<Sample> &samples, const std::filesystem::path &path, std::uint64_t config_hash);
std::vector<Sample> read_dataset(const std::filesystem::path &path, DatasetHeader *header = nullptr);

/// One JSON object per line with the container's field names.
void write_jsonl(const std::vector<Sample> &samples, const std::filesystem::path &path,
                 const symbolic::Vocabulary &vocab);

}  // namespace prose::data
