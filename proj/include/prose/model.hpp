#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prose/dataset.hpp"
#include "prose/nn/layers.hpp"
#include "prose/symbolic/vocabulary.hpp"

namespace prose::model {

using nn::Mat;
using nn::Tape;
using nn::Var;

struct ProseConfig {
    int width = 64;
    int heads = 8;
    int ffn = 256;
    int data_encoder_layers = 2;
    int symbol_encoder_layers = 4;
    int fusion_layers = 8;
    int data_decoder_layers = 8;
    int symbol_decoder_layers = 8;
    int vocab_size = 1221;
    int d_max = 3;
    int max_symbol_len = 256;
    /// false drops the symbol encoder, fusion and symbol decoder; the data
    /// decoder then reads the data encoder output directly.
    bool multimodal = true;
    std::uint64_t init_seed = 0;

    /// Width 512, FFN 2048, layer counts 2/4/8/8/8.
    static ProseConfig full();
    /// Width 64, FFN 256 and shallower stacks sized for one CPU core.
    static ProseConfig desk();

    void validate() const;
};

nlohmann::json to_json(const ProseConfig &cfg);
ProseConfig model_config_from_json(const nlohmann::json &j);
std::uint64_t config_hash(const ProseConfig &cfg);

/// Times enter the linear data embedding as (t - center) / half_range so the
/// embedding of a time alone keeps its direction varying across the window
/// after layer normalisation.
inline constexpr double kTimeCenter = 3.0;
inline constexpr double kTimeHalfRange = 3.0;
double time_feature(double time);

/// Root-mean-square of the observed input values (masked-in columns only).
/// Inputs are divided by it before embedding and predictions multiplied by it.
double data_scale(const data::Sample &s);

/// Fusion attention probabilities, [layer][head], each (n_data + n_symbol)^2.
using AttentionMaps = std::vector<std::vector<Mat>>;

struct GreedyResult {
    symbolic::TokenSeq tokens;  // without <sos>/<eos>
    bool truncated = false;     // max_len reached before <eos>
};

/// Greedy decoding over an abstract next-token scorer. `next_logits`
/// receives the prefix (starting with <sos>) and returns one score per
/// vocabulary entry. At most `max_len` tokens (counting <eos>) are generated.
GreedyResult greedy_decode(const std::function<std::vector<double>(const symbolic::TokenSeq &)> &next_logits,
                           symbolic::TokenId sos, symbolic::TokenId eos, int max_len);

class Prose {
   public:
    explicit Prose(const ProseConfig &cfg);
    Prose(const Prose &) = delete;
    Prose &operator=(const Prose &) = delete;
    Prose(Prose &&) = default;

    const ProseConfig &config() const { return cfg_; }
    nn::ParamStore &params() { return params_; }
    const nn::ParamStore &params() const { return params_; }

    // Stages --------------------------------------------------------------

    /// rows: (t_i, u(t_i) / scale) with 1 + d_max columns.
    Var encode_data(Tape &t, const Mat &points) const;
    /// Throws UnknownToken; <pad> positions are hidden from attention.
    Var encode_symbol(Tape &t, const symbolic::TokenSeq &tokens) const;

    struct Fused {
        Var data;
        Var symbol;
    };
    /// `isolate` restricts attention to within-modality blocks (diagnostic).
    Fused fuse(Tape &t, Var data_features, Var symbol_features, const symbolic::TokenSeq &symbol_tokens,
               bool isolate = false, AttentionMaps *maps = nullptr) const;

    /// Predictions in scaled units, one row per query time. Rows do not
    /// interact: each equals the result of decoding that query alone.
    Var decode_data(Tape &t, Var memory, const std::vector<double> &query_times) const;
    /// Logits for target ++ <eos> given <sos> ++ target.
    Var decode_symbol_teacher(Tape &t, Var memory, const symbolic::TokenSeq &memory_tokens,
                              const symbolic::TokenSeq &target) const;
    /// Logits row for the token after `prefix` (which starts with <sos>).
    std::vector<double> next_token_logits(const Mat &memory, const symbolic::TokenSeq &memory_tokens,
                                          const symbolic::TokenSeq &prefix) const;

    // Whole-sample passes ---------------------------------------------------

    struct Outputs {
        Var prediction;  // n_query x d_max, original units
        Var logits;      // invalid unless the symbol path ran
        Var fused_symbol;
    };
    Outputs forward(Tape &t, const data::Sample &s, bool symbol_path, AttentionMaps *maps = nullptr) const;

    /// Inference helpers on a value-only tape.
    Mat predict(const data::Sample &s, const std::vector<double> &query_times) const;
    Mat predict(const data::Sample &s) const { return predict(s, s.query_times); }
    GreedyResult generate_symbols(const data::Sample &s, int max_len = 0) const;
    AttentionMaps fusion_attention(const data::Sample &s) const;

   private:
    Mat input_points(const data::Sample &s, double scale) const;

    ProseConfig cfg_;
    nn::ParamStore params_;
    nn::Linear data_embed_;
    nn::Param *word_table_ = nullptr;
    nn::Param *modality_data_ = nullptr;
    nn::Param *modality_symbol_ = nullptr;
    std::vector<nn::EncoderLayer> data_encoder_, symbol_encoder_, fusion_;
    std::vector<nn::CrossLayer> data_decoder_;
    std::vector<nn::DecoderLayer> symbol_decoder_;
    nn::LayerNorm data_encoder_norm_, symbol_encoder_norm_, fusion_norm_, data_decoder_norm_, symbol_decoder_norm_;
    nn::Linear data_head_, symbol_head_;
};

/// Writes one CSV per fusion layer and head (layer{l}_head{h}.csv, row-major).
std::vector<std::filesystem::path> export_attention(const AttentionMaps &maps, const std::filesystem::path &dir);

// Checkpoints ---------------------------------------------------------------
// 8-byte magic "PROSECK\0", u32 version, u64 model config hash, u64
// vocabulary hash, u64 run hash, u32 length + model config JSON, u32 tensor
// count, then per tensor: u16 name length + name, u32 rows, u32 cols and the
// row-major little-endian doubles.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
    std::uint32_t version = kCheckpointVersion;
    std::uint64_t model_hash = 0;
    std::uint64_t vocab_hash = 0;
    std::uint64_t run_hash = 0;
    ProseConfig config;
};

void save_checkpoint(const Prose &m, const std::filesystem::path &path, std::uint64_t vocab_hash,
                     std::uint64_t run_hash = 0);
/// Throws SchemaMismatch on foreign files, other versions, hash or shape
/// disagreements, and CorruptRecord on truncation.
Prose load_checkpoint(const std::filesystem::path &path, std::uint64_t expected_vocab_hash,
                      CheckpointHeader *header = nullptr);
CheckpointHeader read_checkpoint_header(const std::filesystem::path &path);

}  // namespace prose::model
