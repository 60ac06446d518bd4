#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "prose/symbolic/expr.hpp"

namespace prose::symbolic {

using TokenId = std::int32_t;
/// Ordered list of vocabulary ids, optionally framed by <sos>/<eos>.
using TokenSeq = std::vector<TokenId>;

enum class WordKind : std::uint8_t {
    Pad,
    Sos,
    Eos,
    Placeholder,
    Separator,
    Operator,
    Sign,
    Mantissa,
    Exponent,
    Variable,
};

/// Bijective word <-> id map over the symbolic modality.
///
/// Layout (ids are contiguous in this order): <pad> <sos> <eos> <coef> |,
/// the eight operator words, the sign words + and -, mantissa words
/// 0 .. 10^mantissa_len - 1, exponent words E-max .. Emax and variable words
/// u_1 .. u_max_dim. With the defaults this is 1221 words.
class Vocabulary {
   public:
    explicit Vocabulary(int mantissa_len = 3, int max_exponent = 100, int max_dim = static_cast<int>(kMaxDim));

    std::size_t size() const { return words_.size(); }
    int mantissa_len() const { return mantissa_len_; }
    int max_exponent() const { return max_exponent_; }
    int max_dim() const { return max_dim_; }

    const std::string &word(TokenId id) const;
    std::optional<TokenId> find(std::string_view word) const;
    WordKind kind(TokenId id) const;
    bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < words_.size(); }

    TokenId pad() const { return 0; }
    TokenId sos() const { return 1; }
    TokenId eos() const { return 2; }
    TokenId placeholder() const { return 3; }
    TokenId separator() const { return 4; }

    TokenId op_id(Op op) const;
    TokenId sign_id(bool negative) const { return sign_base_ + (negative ? 1 : 0); }
    TokenId mantissa_id(std::int64_t mantissa) const;
    TokenId exponent_id(int exponent) const;
    TokenId variable_id(int index) const;

    Op op_of(TokenId id) const;
    bool is_negative_sign(TokenId id) const { return id == sign_base_ + 1; }
    std::int64_t mantissa_of(TokenId id) const { return id - mantissa_base_; }
    int exponent_of(TokenId id) const { return id - exponent_base_ - max_exponent_; }
    int variable_of(TokenId id) const { return id - variable_base_; }

    /// FNV-1a over the word list; stored in checkpoint headers.
    std::uint64_t hash() const;

   private:
    int mantissa_len_;
    int max_exponent_;
    int max_dim_;
    TokenId op_base_ = 0, sign_base_ = 0, mantissa_base_ = 0, exponent_base_ = 0, variable_base_ = 0;
    std::vector<std::string> words_;
    std::vector<WordKind> kinds_;
    std::unordered_map<std::string, TokenId> index_;
};

}  // namespace prose::symbolic
