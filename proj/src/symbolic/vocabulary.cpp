#include "prose/symbolic/vocabulary.hpp"

#include <array>

#include "prose/errors.hpp"

namespace prose::symbolic {

namespace {
constexpr std::array<Op, 8> kOperatorOrder = {Op::Add, Op::Sub, Op::Mul, Op::Div,
                                              Op::Pow, Op::Sin, Op::Cos, Op::Neg};
}

Vocabulary::Vocabulary(int mantissa_len, int max_exponent, int max_dim)
    : mantissa_len_(mantissa_len), max_exponent_(max_exponent), max_dim_(max_dim) {
    if (mantissa_len < 1 || mantissa_len > 6) throw Error("mantissa length must be in 1..6");
    if (max_exponent < 0) throw Error("max exponent must be non-negative");
    auto push = [this](std::string w, WordKind k) {
        index_.emplace(w, static_cast<TokenId>(words_.size()));
        words_.push_back(std::move(w));
        kinds_.push_back(k);
    };
    push("<pad>", WordKind::Pad);
    push("<sos>", WordKind::Sos);
    push("<eos>", WordKind::Eos);
    push("<coef>", WordKind::Placeholder);
    push("|", WordKind::Separator);
    op_base_ = static_cast<TokenId>(words_.size());
    for (Op op : kOperatorOrder) push(op_name(op), WordKind::Operator);
    sign_base_ = static_cast<TokenId>(words_.size());
    push("+", WordKind::Sign);
    push("-", WordKind::Sign);
    mantissa_base_ = static_cast<TokenId>(words_.size());
    std::int64_t limit = 1;
    for (int i = 0; i < mantissa_len; ++i) limit *= 10;
    for (std::int64_t m = 0; m < limit; ++m) push(std::to_string(m), WordKind::Mantissa);
    exponent_base_ = static_cast<TokenId>(words_.size());
    for (int e = -max_exponent; e <= max_exponent; ++e) push("E" + std::to_string(e), WordKind::Exponent);
    variable_base_ = static_cast<TokenId>(words_.size());
    for (int i = 1; i <= max_dim; ++i) push("u_" + std::to_string(i), WordKind::Variable);
}

const std::string &Vocabulary::word(TokenId id) const {
    if (!contains(id)) throw UnknownToken("id " + std::to_string(id));
    return words_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view w) const {
    auto it = index_.find(std::string(w));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

WordKind Vocabulary::kind(TokenId id) const {
    if (!contains(id)) throw UnknownToken("id " + std::to_string(id));
    return kinds_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::op_id(Op op) const {
    for (std::size_t i = 0; i < kOperatorOrder.size(); ++i)
        if (kOperatorOrder[i] == op) return op_base_ + static_cast<TokenId>(i);
    throw Error(std::string("not an operator word: ") + op_name(op));
}

Op Vocabulary::op_of(TokenId id) const {
    if (kind(id) != WordKind::Operator) throw InvalidExpression("not an operator id");
    return kOperatorOrder[static_cast<std::size_t>(id - op_base_)];
}

TokenId Vocabulary::mantissa_id(std::int64_t mantissa) const {
    const auto id = mantissa_base_ + static_cast<TokenId>(mantissa);
    if (mantissa < 0 || id >= exponent_base_) throw MalformedTriplet("mantissa " + std::to_string(mantissa));
    return id;
}

TokenId Vocabulary::exponent_id(int exponent) const {
    if (exponent < -max_exponent_ || exponent > max_exponent_)
        throw ExponentOutOfRange("exponent " + std::to_string(exponent));
    return exponent_base_ + exponent + max_exponent_;
}

TokenId Vocabulary::variable_id(int index) const {
    if (index < 0 || index >= max_dim_) throw InvalidExpression("variable index " + std::to_string(index));
    return variable_base_ + index;
}

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto &w : words_) {
        for (unsigned char ch : w) {
            h ^= ch;
            h *= 1099511628211ULL;
        }
        h ^= 0xff;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace prose::symbolic
