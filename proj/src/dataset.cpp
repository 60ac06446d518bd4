#include "prose/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <thread>

#include <json.hpp>

#include "prose/errors.hpp"
#include "prose/symbolic/polish.hpp"

namespace prose::data {

namespace {
constexpr char kMagic[8] = {'P', 'R', 'O', 'S', 'E', 'D', 'S', '\0'};
const std::vector<std::string> kDeskFamilies = {"thomas", "lorenz3d", "halvorsen"};
}  // namespace

const char *mode_name(ExperimentMode m) {
    switch (m) {
        case ExperimentMode::Known: return "known";
        case ExperimentMode::Skeleton: return "skeleton";
        case ExperimentMode::Unknown3D: return "unknown3d";
        case ExperimentMode::UnknownMultiD: return "unknown_multid";
    }
    return "?";
}

ExperimentMode parse_mode(const std::string &name) {
    for (auto m : {ExperimentMode::Known, ExperimentMode::Skeleton, ExperimentMode::Unknown3D,
                   ExperimentMode::UnknownMultiD})
        if (name == mode_name(m)) return m;
    throw Error("unknown experiment mode '" + name + "'");
}

DatasetConfig DatasetConfig::preset(ExperimentMode mode) {
    DatasetConfig cfg;
    cfg.families = kDeskFamilies;
    switch (mode) {
        case ExperimentMode::Known: break;
        case ExperimentMode::Skeleton: cfg.corruption.unknown_coefficients = true; break;
        case ExperimentMode::Unknown3D:
            cfg.corruption = {.unknown_coefficients = true, .deletion_prob = 0.15, .addition_prob = 0.15};
            break;
        case ExperimentMode::UnknownMultiD:
            cfg.corruption = {.unknown_coefficients = true, .deletion_prob = 0.15, .addition_prob = 0.15};
            cfg.families = {"thomas", "lorenz3d", "halvorsen", "lorenz96_4", "double_pendulum", "lorenz96_5"};
            cfg.d_max = 5;
            break;
    }
    return cfg;
}

std::vector<double> DatasetConfig::input_times() const {
    if (base_points < 2 || base_input_points < 1 || base_input_points >= base_points)
        throw Error("invalid base grid layout");
    const double h = t_end / static_cast<double>(base_points - 1);
    return integrate::linspace(0.0, h * static_cast<double>(base_input_points - 1), input_points);
}

std::vector<double> DatasetConfig::label_times() const {
    const double h = t_end / static_cast<double>(base_points - 1);
    return integrate::linspace(h * static_cast<double>(base_input_points), t_end, label_points);
}

integrate::Trajectory add_noise(const integrate::Trajectory &traj, double snr, Rng &rng) {
    if (snr < 0.0) throw Error("snr must be non-negative");
    if (snr == 0.0) return traj;
    const double signal = traj.values.norm();
    if (signal == 0.0) throw ZeroSignal("trajectory has zero norm");
    integrate::Matrix eta(traj.values.rows(), traj.values.cols());
    for (Eigen::Index i = 0; i < eta.rows(); ++i)
        for (Eigen::Index j = 0; j < eta.cols(); ++j) eta(i, j) = rng.normal();
    const double sigma = snr * signal / eta.norm();
    integrate::Trajectory out = traj;
    out.values += sigma * eta;
    return out;
}

Sample pad_to_dim(const Sample &s, std::size_t d_max) {
    if (s.dim > d_max)
        throw DimensionTooLarge("dimension " + std::to_string(s.dim) + " exceeds d_max " + std::to_string(d_max));
    Sample out = s;
    auto pad = [&](const Matrix &m) {
        Matrix p = Matrix::Zero(m.rows(), static_cast<Eigen::Index>(d_max));
        p.leftCols(s.dim) = m.leftCols(s.dim);
        return p;
    };
    out.input_values = pad(s.input_values);
    out.labels = pad(s.labels);
    out.mask.assign(d_max, 0);
    for (std::size_t j = 0; j < s.dim; ++j) out.mask[j] = 1;
    return out;
}

GeneratedSample make_sample(const DatasetConfig &cfg, std::size_t index, const symbolic::Vocabulary &vocab) {
    if (cfg.families.empty()) throw Error("dataset config selects no families");
    if (vocab.mantissa_len() != cfg.mantissa_len) throw Error("vocabulary mantissa length differs from config");
    const std::size_t per_family = cfg.instances_per_family * cfg.ics_per_instance;
    const std::size_t fam_slot = index / per_family;
    if (fam_slot >= cfg.families.size()) throw Error("sample index out of range");
    const auto &fam = ode::family(cfg.families[fam_slot]);
    if (fam.dim > cfg.d_max)
        throw DimensionTooLarge(fam.name + " has dimension " + std::to_string(fam.dim) + " > d_max");
    const std::size_t instance = index / cfg.ics_per_instance;

    const auto t_in = cfg.input_times();
    const auto t_out = cfg.label_times();
    std::vector<double> grid = t_in;
    grid.insert(grid.end(), t_out.begin(), t_out.end());
    const ode::SamplingConfig scfg{cfg.lambda, cfg.ic_box};

    for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        // Parameters are shared by the ICs of one instance; after repeated
        // failures the instance itself is redrawn.
        Rng param_rng(child_seed(cfg.seed, 0x1000000ULL + instance, attempt / 4));
        const auto params = ode::sample_params(fam, scfg, param_rng);
        const std::uint64_t seed = child_seed(cfg.seed, index, attempt);
        Rng rng(seed);
        const auto u0 = ode::sample_initial_condition(fam.dim, scfg, rng);
        auto system = fam.build(params);

        integrate::Trajectory clean;
        try {
            clean = integrate::solve(system, u0, grid, cfg.solver);
        } catch (const SolverError &) {
            continue;
        }
        const auto noisy = add_noise(clean, cfg.snr, rng);

        symbolic::CorruptionConfig corruption = cfg.corruption;
        if (!fam.additive) corruption.deletion_prob = corruption.addition_prob = 0.0;
        const auto guess = symbolic::corrupt(system, corruption, rng);

        Sample s;
        s.family = fam.name;
        s.dim = static_cast<std::uint32_t>(fam.dim);
        s.seed = seed;
        s.input_times = t_in;
        s.query_times = t_out;
        const auto n_in = static_cast<Eigen::Index>(t_in.size());
        const auto n_out = static_cast<Eigen::Index>(t_out.size());
        s.input_values = noisy.values.topRows(n_in);
        s.labels = noisy.values.bottomRows(n_out);
        s.mask.assign(fam.dim, 1);
        s.symbol_target = symbolic::to_polish(system, vocab);
        s.symbol_input = symbolic::to_polish(guess, vocab);
        s.initial_state = u0;
        s.last_input_state.resize(fam.dim);
        for (std::size_t j = 0; j < fam.dim; ++j)
            s.last_input_state[j] = clean.values(n_in - 1, static_cast<Eigen::Index>(j));
        return {pad_to_dim(s, cfg.d_max), std::move(clean), std::move(system)};
    }
    throw GenerationExhausted("sample " + std::to_string(index) + " failed " + std::to_string(cfg.max_retries + 1) +
                              " attempts");
}

std::vector<Sample> generate(const DatasetConfig &cfg, const symbolic::Vocabulary &vocab, std::size_t begin,
                             std::size_t count, std::size_t workers) {
    std::vector<Sample> out(count);
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = make_sample(cfg, begin + i, vocab).sample;
        return out;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) out[i] = make_sample(cfg, begin + i, vocab).sample;
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto &t : pool) t.join();
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

// Container I/O -------------------------------------------------------------

namespace {

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
        return v;
    } else {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
}

class ByteWriter {
   public:
    template <typename T>
    void put(T v) {
        v = to_little(v);
        const auto *p = reinterpret_cast<const char *>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void put_string(const std::string &s) {
        put(static_cast<std::uint16_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void put_doubles(const double *p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) put(p[i]);
    }
    void put_vector(const std::vector<double> &v) {
        put(static_cast<std::uint32_t>(v.size()));
        put_doubles(v.data(), v.size());
    }
    void put_tokens(const symbolic::TokenSeq &t) {
        put(static_cast<std::uint32_t>(t.size()));
        for (auto id : t) put(static_cast<std::int32_t>(id));
    }
    const std::vector<char> &bytes() const { return buf_; }

   private:
    std::vector<char> buf_;
};

class ByteReader {
   public:
    ByteReader(const std::vector<char> &buf, std::size_t record) : buf_(buf), record_(record) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return to_little(v);
    }
    std::string get_string() {
        const auto n = get<std::uint16_t>();
        need(n);
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    std::vector<double> get_vector() {
        const auto n = get<std::uint32_t>();
        need(static_cast<std::size_t>(n) * 8);
        std::vector<double> v(n);
        for (auto &x : v) x = get<double>();
        return v;
    }
    Matrix get_matrix(std::size_t rows, std::size_t cols) {
        need(rows * cols * 8);
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get<double>();
        return m;
    }
    symbolic::TokenSeq get_tokens() {
        const auto n = get<std::uint32_t>();
        need(static_cast<std::size_t>(n) * 4);
        symbolic::TokenSeq t(n);
        for (auto &id : t) id = get<std::int32_t>();
        return t;
    }
    bool done() const { return pos_ == buf_.size(); }

   private:
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw CorruptRecord(record_, "payload shorter than its fields");
    }
    const std::vector<char> &buf_;
    std::size_t record_;
    std::size_t pos_ = 0;
};

std::vector<char> encode_record(const Sample &s) {
    ByteWriter w;
    w.put_string(s.family);
    w.put(s.dim);
    w.put(static_cast<std::uint32_t>(s.d_max()));
    w.put(s.seed);
    w.put_vector(s.input_times);
    w.put_doubles(s.input_values.data(), static_cast<std::size_t>(s.input_values.size()));
    for (auto m : s.mask) w.put(m);
    w.put_vector(s.query_times);
    w.put_doubles(s.labels.data(), static_cast<std::size_t>(s.labels.size()));
    w.put_tokens(s.symbol_input);
    w.put_tokens(s.symbol_target);
    w.put_vector(s.initial_state);
    w.put_vector(s.last_input_state);
    return w.bytes();
}

Sample decode_record(const std::vector<char> &buf, std::size_t index) {
    ByteReader r(buf, index);
    Sample s;
    s.family = r.get_string();
    s.dim = r.get<std::uint32_t>();
    const auto d_max = r.get<std::uint32_t>();
    if (s.dim > d_max || d_max > 64) throw CorruptRecord(index, "implausible dimensions");
    s.seed = r.get<std::uint64_t>();
    s.input_times = r.get_vector();
    s.input_values = r.get_matrix(s.input_times.size(), d_max);
    s.mask.resize(d_max);
    for (auto &m : s.mask) m = r.get<std::uint8_t>();
    s.query_times = r.get_vector();
    s.labels = r.get_matrix(s.query_times.size(), d_max);
    s.symbol_input = r.get_tokens();
    s.symbol_target = r.get_tokens();
    s.initial_state = r.get_vector();
    s.last_input_state = r.get_vector();
    if (!r.done()) throw CorruptRecord(index, "trailing bytes in record");
    return s;
}

template <typename T>
void write_raw(std::ostream &out, T v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
bool read_raw(std::istream &in, T &v) {
    in.read(reinterpret_cast<char *>(&v), sizeof(T));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) return false;
    v = to_little(v);
    return true;
}

}  // namespace

DatasetWriter::DatasetWriter(const std::filesystem::path &path, std::uint64_t config_hash)
    : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    out_.write(kMagic, sizeof kMagic);
    write_raw(out_, kDatasetVersion);
    write_raw(out_, config_hash);
    write_raw(out_, std::uint64_t{0});
}

DatasetWriter::~DatasetWriter() {
    try {
        close();
    } catch (...) {
    }
}

void DatasetWriter::write(const Sample &s) {
    const auto bytes = encode_record(s);
    write_raw(out_, static_cast<std::uint64_t>(bytes.size()));
    out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    ++count_;
}

void DatasetWriter::close() {
    if (closed_) return;
    closed_ = true;
    out_.seekp(sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t));
    write_raw(out_, count_);
    out_.close();
    if (out_.fail()) throw Error("failed to finalize dataset file");
}

DatasetReader::DatasetReader(const std::filesystem::path &path) : in_(path, std::ios::binary) {
    if (!in_) throw Error("cannot open " + path.string());
    char magic[8];
    in_.read(magic, sizeof magic);
    if (in_.gcount() != sizeof magic || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw SchemaMismatch("not a dataset container");
    if (!read_raw(in_, header_.version) || !read_raw(in_, header_.config_hash) || !read_raw(in_, header_.record_count))
        throw SchemaMismatch("truncated header");
    if (header_.version != kDatasetVersion)
        throw SchemaMismatch("file version " + std::to_string(header_.version) + ", reader version " +
                             std::to_string(kDatasetVersion));
}

std::optional<Sample> DatasetReader::next() {
    if (read_ == header_.record_count) return std::nullopt;
    std::uint64_t len = 0;
    if (!read_raw(in_, len)) throw CorruptRecord(read_, "missing record length");
    if (len > (1ULL << 32)) throw CorruptRecord(read_, "implausible record length");
    std::vector<char> buf(len);
    in_.read(buf.data(), static_cast<std::streamsize>(len));
    if (static_cast<std::uint64_t>(in_.gcount()) != len) throw CorruptRecord(read_, "record truncated");
    return decode_record(buf, read_++);
}

void write_dataset(const std::vector<Sample> &samples, const std::filesystem::path &path, std::uint64_t config_hash) {
    DatasetWriter w(path, config_hash);
    for (const auto &s : samples) w.write(s);
    w.close();
}

std::vector<Sample> read_dataset(const std::filesystem::path &path, DatasetHeader *header) {
    DatasetReader r(path);
    if (header) *header = r.header();
    std::vector<Sample> out;
    out.reserve(r.header().record_count);
    while (auto s = r.next()) out.push_back(std::move(*s));
    return out;
}

void write_jsonl(const std::vector<Sample> &samples, const std::filesystem::path &path,
                 const symbolic::Vocabulary &vocab) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string());
    auto rows = [](const Matrix &m) {
        nlohmann::json a = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
            a.push_back(std::move(row));
        }
        return a;
    };
    for (const auto &s : samples) {
        nlohmann::json j;
        j["family"] = s.family;
        j["dim"] = s.dim;
        j["d_max"] = s.d_max();
        j["seed"] = s.seed;
        j["input_times"] = s.input_times;
        j["input_values"] = rows(s.input_values);
        j["mask"] = s.mask;
        j["query_times"] = s.query_times;
        j["labels"] = rows(s.labels);
        j["symbol_input"] = s.symbol_input;
        j["symbol_target"] = s.symbol_target;
        j["symbol_input_words"] = symbolic::to_words(s.symbol_input, vocab);
        j["symbol_target_words"] = symbolic::to_words(s.symbol_target, vocab);
        j["initial_state"] = s.initial_state;
        j["last_input_state"] = s.last_input_state;
        out << j.dump() << '\n';
    }
}

}  // namespace prose::data

namespace prose::data {

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

nlohmann::json to_json(const DatasetConfig &cfg) {
    return {
        {"families", cfg.families},
        {"instances_per_family", cfg.instances_per_family},
        {"ics_per_instance", cfg.ics_per_instance},
        {"lambda", cfg.lambda},
        {"ic_box", cfg.ic_box},
        {"snr", cfg.snr},
        {"t_end", cfg.t_end},
        {"base_points", cfg.base_points},
        {"base_input_points", cfg.base_input_points},
        {"input_points", cfg.input_points},
        {"label_points", cfg.label_points},
        {"unknown_coefficients", cfg.corruption.unknown_coefficients},
        {"deletion_prob", cfg.corruption.deletion_prob},
        {"addition_prob", cfg.corruption.addition_prob},
        {"d_max", cfg.d_max},
        {"mantissa_len", cfg.mantissa_len},
        {"seed", cfg.seed},
        {"max_retries", cfg.max_retries},
        {"abs_tol", cfg.solver.abs_tol},
        {"rel_tol", cfg.solver.rel_tol},
        {"max_steps", cfg.solver.max_steps},
    };
}

DatasetConfig dataset_config_from_json(const nlohmann::json &j) {
    DatasetConfig cfg;
    if (j.contains("mode")) cfg = DatasetConfig::preset(parse_mode(j.at("mode").get<std::string>()));
    for (const auto &[key, v] : j.items()) {
        if (key == "mode") continue;
        else if (key == "families") cfg.families = v.get<std::vector<std::string>>();
        else if (key == "instances_per_family") cfg.instances_per_family = v.get<std::size_t>();
        else if (key == "ics_per_instance") cfg.ics_per_instance = v.get<std::size_t>();
        else if (key == "lambda") cfg.lambda = v.get<double>();
        else if (key == "ic_box") cfg.ic_box = v.get<double>();
        else if (key == "snr") cfg.snr = v.get<double>();
        else if (key == "t_end") cfg.t_end = v.get<double>();
        else if (key == "base_points") cfg.base_points = v.get<std::size_t>();
        else if (key == "base_input_points") cfg.base_input_points = v.get<std::size_t>();
        else if (key == "input_points") cfg.input_points = v.get<std::size_t>();
        else if (key == "label_points") cfg.label_points = v.get<std::size_t>();
        else if (key == "unknown_coefficients") cfg.corruption.unknown_coefficients = v.get<bool>();
        else if (key == "deletion_prob") cfg.corruption.deletion_prob = v.get<double>();
        else if (key == "addition_prob") cfg.corruption.addition_prob = v.get<double>();
        else if (key == "d_max") cfg.d_max = v.get<std::size_t>();
        else if (key == "mantissa_len") cfg.mantissa_len = v.get<int>();
        else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
        else if (key == "max_retries") cfg.max_retries = v.get<std::size_t>();
        else if (key == "abs_tol") cfg.solver.abs_tol = v.get<double>();
        else if (key == "rel_tol") cfg.solver.rel_tol = v.get<double>();
        else if (key == "max_steps") cfg.solver.max_steps = v.get<long>();
        else throw Error("unknown dataset config key '" + key + "'");
    }
    return cfg;
}

std::uint64_t config_hash(const DatasetConfig &cfg) { return fnv1a(to_json(cfg).dump()); }

}  // namespace prose::data
