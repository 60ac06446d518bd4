#include "prose/symbolic/polish.hpp"

#include <cmath>
#include <sstream>

#include "prose/errors.hpp"

namespace prose::symbolic {

namespace {

// 10^k; exact for |k| <= 22 since the literals below are exact doubles.
double pow10(int k) {
    static constexpr double kTable[] = {1e0,  1e1,  1e2,  1e3,  1e4,  1e5,  1e6,  1e7,
                                        1e8,  1e9,  1e10, 1e11, 1e12, 1e13, 1e14, 1e15,
                                        1e16, 1e17, 1e18, 1e19, 1e20, 1e21, 1e22};
    if (k >= 0 && k <= 22) return kTable[k];
    return std::pow(10.0, k);
}

// |x| / 10^e computed so that negative e multiplies by an exact power.
double scale_down(double a, int e) {
    if (e >= 0) return a / pow10(e);
    if (-e <= 22) return a * pow10(-e);
    return a * pow10(22) * pow10(-e - 22);
}

}  // namespace

FloatTriplet encode_float(double x, int mantissa_len, int max_exponent) {
    if (!std::isfinite(x)) throw ExponentOutOfRange("non-finite value");
    if (mantissa_len < 1) throw Error("mantissa length must be >= 1");
    if (x == 0.0) return {};
    const double a = std::fabs(x);
    const auto lo = static_cast<std::int64_t>(pow10(mantissa_len - 1));
    const auto hi = static_cast<std::int64_t>(pow10(mantissa_len));
    int e = static_cast<int>(std::floor(std::log10(a))) - (mantissa_len - 1);
    auto m = static_cast<std::int64_t>(std::llround(scale_down(a, e)));
    // log10 can be off by one ulp near powers of ten; rounding can carry
    for (int guard = 0; guard < 3 && (m >= hi || m < lo); ++guard) {
        e += (m >= hi) ? 1 : -1;
        m = static_cast<std::int64_t>(std::llround(scale_down(a, e)));
    }
    if (m >= hi) {
        m /= 10;
        ++e;
    }
    if (e < -max_exponent || e > max_exponent)
        throw ExponentOutOfRange("value " + std::to_string(x) + " needs exponent " + std::to_string(e));
    return {x < 0.0, m, e};
}

double decode_float(const FloatTriplet &t) {
    if (t.mantissa < 0) throw MalformedTriplet("negative mantissa");
    const auto m = static_cast<double>(t.mantissa);
    const double mag = t.exponent >= 0 ? m * pow10(t.exponent)
                       : -t.exponent <= 22 ? m / pow10(-t.exponent)
                                           : m / pow10(22) / pow10(-t.exponent - 22);
    return t.negative ? -mag : mag;
}

namespace {

void emit_words(const Expr &e, int mantissa_len, std::vector<std::string> &out) {
    switch (e.op) {
        case Op::Const: {
            const auto t = encode_float(e.value, mantissa_len);
            out.emplace_back(t.negative ? "-" : "+");
            out.push_back(std::to_string(t.mantissa));
            out.push_back("E" + std::to_string(t.exponent));
            return;
        }
        case Op::Var:
            out.push_back("u_" + std::to_string(e.var + 1));
            return;
        case Op::Placeholder:
            out.emplace_back("<coef>");
            return;
        default:
            out.emplace_back(op_name(e.op));
            for (const auto &ch : e.children) emit_words(ch, mantissa_len, out);
    }
}

void emit_ids(const Expr &e, const Vocabulary &vocab, TokenSeq &out) {
    switch (e.op) {
        case Op::Const: {
            const auto t = encode_float(e.value, vocab.mantissa_len(), vocab.max_exponent());
            out.push_back(vocab.sign_id(t.negative));
            out.push_back(vocab.mantissa_id(t.mantissa));
            out.push_back(vocab.exponent_id(t.exponent));
            return;
        }
        case Op::Var:
            out.push_back(vocab.variable_id(e.var));
            return;
        case Op::Placeholder:
            out.push_back(vocab.placeholder());
            return;
        default:
            out.push_back(vocab.op_id(e.op));
            for (const auto &ch : e.children) emit_ids(ch, vocab, out);
    }
}

class Parser {
   public:
    Parser(std::span<const TokenId> tokens, const Vocabulary &vocab) : toks_(tokens), vocab_(vocab) {}

    SystemExpr parse() {
        if (!toks_.empty() && toks_.front() == vocab_.sos()) toks_ = toks_.subspan(1);
        if (!toks_.empty() && toks_.back() == vocab_.eos()) toks_ = toks_.subspan(0, toks_.size() - 1);
        if (toks_.empty()) throw InvalidExpression("empty sequence");
        SystemExpr sys;
        while (true) {
            sys.components.push_back(parse_node());
            if (pos_ == toks_.size()) break;
            if (toks_[pos_] != vocab_.separator())
                throw InvalidExpression("leftover tokens at position " + std::to_string(pos_));
            ++pos_;
            if (sys.components.size() >= static_cast<std::size_t>(vocab_.max_dim()))
                throw InvalidExpression("too many components");
        }
        for (const int v : max_var_)
            if (static_cast<std::size_t>(v) >= sys.dim())
                throw InvalidExpression("variable u_" + std::to_string(v + 1) + " exceeds dimension " +
                                        std::to_string(sys.dim()));
        return sys;
    }

   private:
    TokenId next() {
        if (pos_ >= toks_.size()) throw InvalidExpression("truncated sequence");
        const TokenId id = toks_[pos_++];
        if (!vocab_.contains(id)) throw InvalidExpression("unknown id " + std::to_string(id));
        return id;
    }

    Expr parse_node() {
        const TokenId id = next();
        switch (vocab_.kind(id)) {
            case WordKind::Operator: {
                Expr e{vocab_.op_of(id), 0.0, 0, {}};
                const int n = arity(e.op);
                e.children.reserve(static_cast<std::size_t>(n));
                for (int i = 0; i < n; ++i) e.children.push_back(parse_node());
                return e;
            }
            case WordKind::Variable: {
                const int v = vocab_.variable_of(id);
                max_var_.push_back(v);
                return u(v);
            }
            case WordKind::Placeholder:
                return placeholder();
            case WordKind::Sign: {
                FloatTriplet t;
                t.negative = vocab_.is_negative_sign(id);
                const TokenId m = next();
                if (vocab_.kind(m) != WordKind::Mantissa) throw InvalidExpression("malformed float: expected mantissa");
                const TokenId ex = next();
                if (vocab_.kind(ex) != WordKind::Exponent) throw InvalidExpression("malformed float: expected exponent");
                t.mantissa = vocab_.mantissa_of(m);
                t.exponent = vocab_.exponent_of(ex);
                return c(decode_float(t));
            }
            default:
                throw InvalidExpression("unexpected word '" + vocab_.word(id) + "' at position " +
                                        std::to_string(pos_ - 1));
        }
    }

    std::span<const TokenId> toks_;
    const Vocabulary &vocab_;
    std::size_t pos_ = 0;
    std::vector<int> max_var_;
};

}  // namespace

std::vector<std::string> polish_words(const SystemExpr &sys, int mantissa_len) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < sys.dim(); ++i) {
        if (i > 0) out.emplace_back("|");
        emit_words(sys.components[i], mantissa_len, out);
    }
    return out;
}

TokenSeq to_polish(const SystemExpr &sys, const Vocabulary &vocab) {
    TokenSeq out;
    for (std::size_t i = 0; i < sys.dim(); ++i) {
        if (i > 0) out.push_back(vocab.separator());
        emit_ids(sys.components[i], vocab, out);
    }
    return out;
}

SystemExpr from_polish(std::span<const TokenId> tokens, const Vocabulary &vocab) {
    return Parser(tokens, vocab).parse();
}

std::string to_words(std::span<const TokenId> tokens, const Vocabulary &vocab) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += vocab.word(tokens[i]);
    }
    return out;
}

TokenSeq from_words(std::string_view text, const Vocabulary &vocab) {
    std::istringstream in{std::string(text)};
    TokenSeq out;
    std::string w;
    while (in >> w) {
        auto id = vocab.find(w);
        if (!id) throw UnknownToken("word '" + w + "'");
        out.push_back(*id);
    }
    return out;
}

}  // namespace prose::symbolic
