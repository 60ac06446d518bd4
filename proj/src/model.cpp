#include "prose/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "prose/errors.hpp"

namespace prose::model {

ProseConfig ProseConfig::full() {
    ProseConfig c;
    c.width = 512;
    c.ffn = 2048;
    return c;
}

ProseConfig ProseConfig::desk() {
    ProseConfig c;
    c.data_encoder_layers = 2;
    c.symbol_encoder_layers = 2;
    c.fusion_layers = 4;
    c.data_decoder_layers = 4;
    c.symbol_decoder_layers = 4;
    return c;
}

void ProseConfig::validate() const {
    if (width <= 0 || heads <= 0 || width % heads != 0) throw Error("model width must be a positive multiple of heads");
    if (ffn <= 0 || vocab_size <= 5 || d_max <= 0 || max_symbol_len <= 0) throw Error("invalid model dimensions");
    for (int n : {data_encoder_layers, symbol_encoder_layers, fusion_layers, data_decoder_layers, symbol_decoder_layers})
        if (n < 0) throw Error("negative layer count");
}

nlohmann::json to_json(const ProseConfig &c) {
    return {{"width", c.width},
            {"heads", c.heads},
            {"ffn", c.ffn},
            {"data_encoder_layers", c.data_encoder_layers},
            {"symbol_encoder_layers", c.symbol_encoder_layers},
            {"fusion_layers", c.fusion_layers},
            {"data_decoder_layers", c.data_decoder_layers},
            {"symbol_decoder_layers", c.symbol_decoder_layers},
            {"vocab_size", c.vocab_size},
            {"d_max", c.d_max},
            {"max_symbol_len", c.max_symbol_len},
            {"multimodal", c.multimodal},
            {"init_seed", c.init_seed}};
}

ProseConfig model_config_from_json(const nlohmann::json &j) {
    ProseConfig c;
    if (j.contains("preset")) {
        const auto p = j.at("preset").get<std::string>();
        if (p == "full") c = ProseConfig::full();
        else if (p == "desk") c = ProseConfig::desk();
        else throw Error("unknown model preset '" + p + "'");
    }
    for (const auto &[key, v] : j.items()) {
        if (key == "preset") continue;
        else if (key == "width") c.width = v.get<int>();
        else if (key == "heads") c.heads = v.get<int>();
        else if (key == "ffn") c.ffn = v.get<int>();
        else if (key == "data_encoder_layers") c.data_encoder_layers = v.get<int>();
        else if (key == "symbol_encoder_layers") c.symbol_encoder_layers = v.get<int>();
        else if (key == "fusion_layers") c.fusion_layers = v.get<int>();
        else if (key == "data_decoder_layers") c.data_decoder_layers = v.get<int>();
        else if (key == "symbol_decoder_layers") c.symbol_decoder_layers = v.get<int>();
        else if (key == "vocab_size") c.vocab_size = v.get<int>();
        else if (key == "d_max") c.d_max = v.get<int>();
        else if (key == "max_symbol_len") c.max_symbol_len = v.get<int>();
        else if (key == "multimodal") c.multimodal = v.get<bool>();
        else if (key == "init_seed") c.init_seed = v.get<std::uint64_t>();
        else throw Error("unknown model config key '" + key + "'");
    }
    c.validate();
    return c;
}

std::uint64_t config_hash(const ProseConfig &cfg) { return data::fnv1a(to_json(cfg).dump()); }

double data_scale(const data::Sample &s) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < s.mask.size(); ++j) {
        if (!s.mask[j]) continue;
        sum += s.input_values.col(static_cast<Eigen::Index>(j)).squaredNorm();
        n += static_cast<std::size_t>(s.input_values.rows());
    }
    const double rms = n ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
    return rms > 1e-8 ? rms : 1.0;
}

GreedyResult greedy_decode(const std::function<std::vector<double>(const symbolic::TokenSeq &)> &next_logits,
                           symbolic::TokenId sos, symbolic::TokenId eos, int max_len) {
    if (max_len < 1) throw Error("max_len must be at least 1");
    GreedyResult r;
    symbolic::TokenSeq prefix{sos};
    for (int step = 0; step < max_len; ++step) {
        const auto scores = next_logits(prefix);
        symbolic::TokenId best = 0;
        for (std::size_t k = 1; k < scores.size(); ++k)
            if (scores[k] > scores[static_cast<std::size_t>(best)]) best = static_cast<symbolic::TokenId>(k);
        if (best == eos) return r;
        r.tokens.push_back(best);
        prefix.push_back(best);
    }
    r.truncated = true;
    return r;
}

// ---------------------------------------------------------------------------

Prose::Prose(const ProseConfig &cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.init_seed);
    const Eigen::Index w = cfg_.width;
    auto stack = [&](auto &layers, int n, const std::string &name, auto make) {
        for (int i = 0; i < n; ++i) layers.push_back(make(name + "." + std::to_string(i)));
    };
    auto enc = [&](const std::string &n) { return nn::EncoderLayer::create(params_, n, w, cfg_.heads, cfg_.ffn, rng); };

    data_embed_ = nn::Linear::create(params_, "data_embed", 1 + cfg_.d_max, w, rng);
    stack(data_encoder_, cfg_.data_encoder_layers, "data_encoder", enc);
    data_encoder_norm_ = nn::LayerNorm::create(params_, "data_encoder.norm", w);

    if (cfg_.multimodal) {
        word_table_ = &params_.add("word_embed", cfg_.vocab_size, w);
        nn::init_uniform(*word_table_, std::sqrt(3.0 / static_cast<double>(w)), rng);
        stack(symbol_encoder_, cfg_.symbol_encoder_layers, "symbol_encoder", enc);
        symbol_encoder_norm_ = nn::LayerNorm::create(params_, "symbol_encoder.norm", w);

        modality_data_ = &params_.add("modality.data", 1, w);
        modality_symbol_ = &params_.add("modality.symbol", 1, w);
        nn::init_uniform(*modality_data_, 0.5, rng);
        nn::init_uniform(*modality_symbol_, 0.5, rng);
        stack(fusion_, cfg_.fusion_layers, "fusion", enc);
        fusion_norm_ = nn::LayerNorm::create(params_, "fusion.norm", w);
    }

    stack(data_decoder_, cfg_.data_decoder_layers, "data_decoder",
          [&](const std::string &n) { return nn::CrossLayer::create(params_, n, w, cfg_.heads, cfg_.ffn, rng); });
    data_decoder_norm_ = nn::LayerNorm::create(params_, "data_decoder.norm", w);
    data_head_ = nn::Linear::create(params_, "data_head", w, cfg_.d_max, rng);

    if (cfg_.multimodal) {
        stack(symbol_decoder_, cfg_.symbol_decoder_layers, "symbol_decoder",
              [&](const std::string &n) { return nn::DecoderLayer::create(params_, n, w, cfg_.heads, cfg_.ffn, rng); });
        symbol_decoder_norm_ = nn::LayerNorm::create(params_, "symbol_decoder.norm", w);
        symbol_head_ = nn::Linear::create(params_, "symbol_head", w, cfg_.vocab_size, rng);
    }
}

double time_feature(double time) { return (time - kTimeCenter) / kTimeHalfRange; }

Var Prose::encode_data(Tape &t, const Mat &points) const {
    if (points.cols() != 1 + cfg_.d_max)
        throw ShapeMismatch("data points need " + std::to_string(1 + cfg_.d_max) + " columns");
    Mat p = points;
    p.col(0) = p.col(0).unaryExpr([](double v) { return time_feature(v); });
    Var x = data_embed_(t, t.constant(std::move(p)));
    for (const auto &layer : data_encoder_) x = layer(t, x, {});
    return data_encoder_norm_(t, x);
}

namespace {

nn::AttentionMask padding_mask(const symbolic::TokenSeq &tokens, symbolic::TokenId pad) {
    nn::AttentionMask m;
    bool any = false;
    for (auto id : tokens) any |= id == pad;
    if (any)
        for (auto id : tokens) m.key_padding.push_back(id == pad ? 1 : 0);
    return m;
}

constexpr symbolic::TokenId kPad = 0, kSos = 1, kEos = 2;

}  // namespace

Var Prose::encode_symbol(Tape &t, const symbolic::TokenSeq &tokens) const {
    if (!cfg_.multimodal) throw Error("data-only model has no symbol encoder");
    if (tokens.empty()) throw ShapeMismatch("empty symbol input");
    const auto n = static_cast<Eigen::Index>(tokens.size());
    Var x = nn::embedding(t, tokens, *word_table_, std::sqrt(static_cast<double>(cfg_.width)));
    x = nn::add_constant(t, x, nn::sinusoidal_pe(n, cfg_.width));
    const auto mask = padding_mask(tokens, kPad);
    for (const auto &layer : symbol_encoder_) x = layer(t, x, mask);
    return symbol_encoder_norm_(t, x);
}

Prose::Fused Prose::fuse(Tape &t, Var data_features, Var symbol_features, const symbolic::TokenSeq &symbol_tokens,
                         bool isolate, AttentionMaps *maps) const {
    if (!cfg_.multimodal) throw Error("data-only model has no fusion stage");
    const Eigen::Index nd = t.value(data_features).rows(), ns = t.value(symbol_features).rows();
    if (t.value(data_features).cols() != t.value(symbol_features).cols())
        throw ShapeMismatch("fusion inputs have different widths");
    if (static_cast<Eigen::Index>(symbol_tokens.size()) != ns) throw ShapeMismatch("symbol tokens vs features");
    Var x = nn::concat_rows(t, nn::add_row(t, data_features, *modality_data_),
                            nn::add_row(t, symbol_features, *modality_symbol_));
    nn::AttentionMask mask;
    bool any_pad = false;
    for (auto id : symbol_tokens) any_pad |= id == kPad;
    if (any_pad) {
        mask.key_padding.assign(static_cast<std::size_t>(nd), 0);
        for (auto id : symbol_tokens) mask.key_padding.push_back(id == kPad ? 1 : 0);
    }
    if (isolate) {
        mask.query_segment.assign(static_cast<std::size_t>(nd), 0);
        mask.query_segment.resize(static_cast<std::size_t>(nd + ns), 1);
        mask.key_segment = mask.query_segment;
    }
    if (maps) maps->clear();
    for (const auto &layer : fusion_) {
        std::vector<Mat> probs;
        x = layer(t, x, mask, maps ? &probs : nullptr);
        if (maps) maps->push_back(std::move(probs));
    }
    x = fusion_norm_(t, x);
    return {nn::slice_rows(t, x, 0, nd), nn::slice_rows(t, x, nd, ns)};
}

Var Prose::decode_data(Tape &t, Var memory, const std::vector<double> &query_times) const {
    if (query_times.empty()) throw ShapeMismatch("no query times");
    if (t.value(memory).cols() != cfg_.width) throw ShapeMismatch("decoder memory width");
    const bool saved = t.row_independent;
    t.row_independent = true;
    Mat q = Mat::Zero(static_cast<Eigen::Index>(query_times.size()), 1 + cfg_.d_max);
    for (std::size_t i = 0; i < query_times.size(); ++i) q(static_cast<Eigen::Index>(i), 0) = time_feature(query_times[i]);
    Var x = data_embed_(t, t.constant(std::move(q)));
    for (const auto &layer : data_decoder_) x = layer(t, x, memory, {});
    x = data_head_(t, data_decoder_norm_(t, x));
    t.row_independent = saved;
    return x;
}

Var Prose::decode_symbol_teacher(Tape &t, Var memory, const symbolic::TokenSeq &memory_tokens,
                                 const symbolic::TokenSeq &target) const {
    if (!cfg_.multimodal) throw Error("data-only model has no symbol decoder");
    symbolic::TokenSeq in{kSos};
    in.insert(in.end(), target.begin(), target.end());
    const auto n = static_cast<Eigen::Index>(in.size());
    Var x = nn::embedding(t, in, *word_table_, std::sqrt(static_cast<double>(cfg_.width)));
    x = nn::add_constant(t, x, nn::sinusoidal_pe(n, cfg_.width));
    const auto mask = padding_mask(memory_tokens, kPad);
    for (const auto &layer : symbol_decoder_) x = layer(t, x, memory, mask);
    return symbol_head_(t, symbol_decoder_norm_(t, x));
}

std::vector<double> Prose::next_token_logits(const Mat &memory, const symbolic::TokenSeq &memory_tokens,
                                             const symbolic::TokenSeq &prefix) const {
    if (prefix.empty() || prefix.front() != kSos) throw Error("prefix must start with <sos>");
    Tape t(false);
    const symbolic::TokenSeq body(prefix.begin() + 1, prefix.end());
    const Mat &logits = t.value(decode_symbol_teacher(t, t.constant(memory), memory_tokens, body));
    const Eigen::Index last = logits.rows() - 1;
    return std::vector<double>(logits.row(last).data(), logits.row(last).data() + logits.cols());
}

Mat Prose::input_points(const data::Sample &s, double scale) const {
    if (static_cast<int>(s.d_max()) != cfg_.d_max)
        throw ShapeMismatch("sample padded to " + std::to_string(s.d_max()) + " columns, model expects " +
                            std::to_string(cfg_.d_max));
    const auto n = static_cast<Eigen::Index>(s.input_times.size());
    Mat p(n, 1 + cfg_.d_max);
    for (Eigen::Index i = 0; i < n; ++i) p(i, 0) = s.input_times[static_cast<std::size_t>(i)];
    p.rightCols(cfg_.d_max) = s.input_values / scale;
    return p;
}

Prose::Outputs Prose::forward(Tape &t, const data::Sample &s, bool symbol_path, AttentionMaps *maps) const {
    const double scale = data_scale(s);
    Outputs out;
    Var memory = encode_data(t, input_points(s, scale));
    if (cfg_.multimodal) {
        const auto fused = fuse(t, memory, encode_symbol(t, s.symbol_input), s.symbol_input, false, maps);
        memory = fused.data;
        out.fused_symbol = fused.symbol;
        if (symbol_path) out.logits = decode_symbol_teacher(t, fused.symbol, s.symbol_input, s.symbol_target);
    }
    out.prediction = nn::scale(t, decode_data(t, memory, s.query_times), scale);
    return out;
}

Mat Prose::predict(const data::Sample &s, const std::vector<double> &query_times) const {
    Tape t(false);
    const double scale = data_scale(s);
    Var memory = encode_data(t, input_points(s, scale));
    if (cfg_.multimodal) memory = fuse(t, memory, encode_symbol(t, s.symbol_input), s.symbol_input).data;
    return scale * t.value(decode_data(t, memory, query_times));
}

GreedyResult Prose::generate_symbols(const data::Sample &s, int max_len) const {
    if (!cfg_.multimodal) throw Error("data-only model has no symbol decoder");
    if (max_len <= 0) max_len = cfg_.max_symbol_len;
    Mat memory;
    {
        Tape t(false);
        const Var data = encode_data(t, input_points(s, data_scale(s)));
        memory = t.value(fuse(t, data, encode_symbol(t, s.symbol_input), s.symbol_input).symbol);
    }
    return greedy_decode(
        [&](const symbolic::TokenSeq &prefix) { return next_token_logits(memory, s.symbol_input, prefix); }, kSos,
        kEos, max_len);
}

AttentionMaps Prose::fusion_attention(const data::Sample &s) const {
    Tape t(false);
    AttentionMaps maps;
    const Var data = encode_data(t, input_points(s, data_scale(s)));
    fuse(t, data, encode_symbol(t, s.symbol_input), s.symbol_input, false, &maps);
    return maps;
}

std::vector<std::filesystem::path> export_attention(const AttentionMaps &maps, const std::filesystem::path &dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> files;
    for (std::size_t l = 0; l < maps.size(); ++l) {
        for (std::size_t h = 0; h < maps[l].size(); ++h) {
            const auto path = dir / ("layer" + std::to_string(l) + "_head" + std::to_string(h) + ".csv");
            std::ofstream out(path);
            if (!out) throw Error("cannot write " + path.string());
            out.precision(17);
            const Mat &m = maps[l][h];
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
                out << '\n';
            }
            files.push_back(path);
        }
    }
    return files;
}

// Checkpoints ---------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'P', 'R', 'O', 'S', 'E', 'C', 'K', '\0'};

template <typename T>
void put(std::ostream &out, T v) {
    static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
    out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T get(std::istream &in, const char *what) {
    T v;
    in.read(reinterpret_cast<char *>(&v), sizeof(T));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw CorruptRecord(0, std::string("checkpoint truncated in ") + what);
    return v;
}

std::string get_bytes(std::istream &in, std::size_t n, const char *what) {
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw CorruptRecord(0, std::string("checkpoint truncated in ") + what);
    return s;
}

CheckpointHeader read_header(std::istream &in) {
    const auto magic = get_bytes(in, sizeof kMagic, "magic");
    if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) throw SchemaMismatch("not a checkpoint file");
    CheckpointHeader h;
    h.version = get<std::uint32_t>(in, "header");
    if (h.version != kCheckpointVersion)
        throw SchemaMismatch("checkpoint version " + std::to_string(h.version) + ", reader version " +
                             std::to_string(kCheckpointVersion));
    h.model_hash = get<std::uint64_t>(in, "header");
    h.vocab_hash = get<std::uint64_t>(in, "header");
    h.run_hash = get<std::uint64_t>(in, "header");
    const auto len = get<std::uint32_t>(in, "header");
    h.config = model_config_from_json(nlohmann::json::parse(get_bytes(in, len, "config")));
    if (config_hash(h.config) != h.model_hash) throw SchemaMismatch("model config does not match its hash");
    return h;
}

}  // namespace

void save_checkpoint(const Prose &m, const std::filesystem::path &path, std::uint64_t vocab_hash,
                     std::uint64_t run_hash) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(kMagic, sizeof kMagic);
        put(out, kCheckpointVersion);
        put(out, config_hash(m.config()));
        put(out, vocab_hash);
        put(out, run_hash);
        const auto js = to_json(m.config()).dump();
        put(out, static_cast<std::uint32_t>(js.size()));
        out.write(js.data(), static_cast<std::streamsize>(js.size()));
        const auto &ps = m.params();
        put(out, static_cast<std::uint32_t>(ps.size()));
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const auto &p = ps[i];
            put(out, static_cast<std::uint16_t>(p.name.size()));
            out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
            put(out, static_cast<std::uint32_t>(p.value.rows()));
            put(out, static_cast<std::uint32_t>(p.value.cols()));
            out.write(reinterpret_cast<const char *>(p.value.data()),
                      static_cast<std::streamsize>(p.value.size() * sizeof(double)));
        }
        if (!out) throw Error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return read_header(in);
}

Prose load_checkpoint(const std::filesystem::path &path, std::uint64_t expected_vocab_hash, CheckpointHeader *header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    const auto h = read_header(in);
    if (h.vocab_hash != expected_vocab_hash) throw SchemaMismatch("checkpoint was trained with another vocabulary");
    Prose m(h.config);
    auto &ps = m.params();
    const auto count = get<std::uint32_t>(in, "tensor count");
    if (count != ps.size()) throw SchemaMismatch("checkpoint tensor count differs from the model");
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name = get_bytes(in, get<std::uint16_t>(in, "tensor name"), "tensor name");
        const auto rows = get<std::uint32_t>(in, "tensor shape");
        const auto cols = get<std::uint32_t>(in, "tensor shape");
        nn::Param *p = ps.find(name);
        if (!p || p->value.rows() != rows || p->value.cols() != cols)
            throw SchemaMismatch("checkpoint tensor '" + name + "' does not fit the model");
        const auto bytes = get_bytes(in, static_cast<std::size_t>(rows) * cols * sizeof(double), "tensor data");
        std::memcpy(p->value.data(), bytes.data(), bytes.size());
    }
    if (header) *header = h;
    return m;
}

}  // namespace prose::model
