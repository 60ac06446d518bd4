#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prose/symbolic/expr.hpp"
#include "prose/symbolic/vocabulary.hpp"

namespace prose::symbolic {

/// Base-10 float as (sign, mantissa, exponent): value = ±mantissa·10^exponent.
struct FloatTriplet {
    bool negative = false;
    std::int64_t mantissa = 0;
    int exponent = 0;

    bool operator==(const FloatTriplet &) const = default;
};

/// Rounds x to mantissa_len significant digits. Zero encodes as (+, 0, E0).
/// Throws ExponentOutOfRange when the exponent leaves [-max_exponent, max_exponent]
/// or x is not finite.
FloatTriplet encode_float(double x, int mantissa_len = 3, int max_exponent = 100);

double decode_float(const FloatTriplet &t);

/// Preorder word sequence; components joined by "|". No <sos>/<eos>.
std::vector<std::string> polish_words(const SystemExpr &sys, int mantissa_len = 3);

TokenSeq to_polish(const SystemExpr &sys, const Vocabulary &vocab);

/// Parses a complete token sequence. An optional leading <sos> and trailing
/// <eos> are accepted; everything else must be consumed by the trees.
/// Throws InvalidExpression (truncation, arity, unknown id, leftovers,
/// malformed float triplet, variable out of range).
SystemExpr from_polish(std::span<const TokenId> tokens, const Vocabulary &vocab);

/// Whitespace-separated word string <-> ids. Unknown words raise UnknownToken.
std::string to_words(std::span<const TokenId> tokens, const Vocabulary &vocab);
TokenSeq from_words(std::string_view text, const Vocabulary &vocab);

}  // namespace prose::symbolic
