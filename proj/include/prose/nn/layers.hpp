#pragma once

#include <string>
#include <vector>

#include "prose/nn/tape.hpp"

namespace prose::nn {

struct Linear {
    Param *w = nullptr;
    Param *b = nullptr;

    static Linear create(ParamStore &s, const std::string &name, Eigen::Index in, Eigen::Index out, Rng &rng,
                         bool bias = true);
    Var operator()(Tape &t, Var x) const { return linear(t, x, *w, b); }
};

struct LayerNorm {
    Param *gamma = nullptr;
    Param *beta = nullptr;

    static LayerNorm create(ParamStore &s, const std::string &name, Eigen::Index width);
    Var operator()(Tape &t, Var x) const { return layer_norm(t, x, *gamma, *beta); }
};

/// Position-wise Linear -> GELU -> Linear.
struct FeedForward {
    Linear in, out;

    static FeedForward create(ParamStore &s, const std::string &name, Eigen::Index width, Eigen::Index hidden,
                              Rng &rng);
    Var operator()(Tape &t, Var x) const { return out(t, gelu(t, in(t, x))); }
};

struct MultiHeadAttention {
    AttentionParams p;

    static MultiHeadAttention create(ParamStore &s, const std::string &name, Eigen::Index width, int heads, Rng &rng);
    Var operator()(Tape &t, Var q, Var ctx, const AttentionMask &mask, std::vector<Mat> *probs = nullptr) const {
        return attention(t, q, ctx, p, mask, probs);
    }
};

/// Pre-norm residual FFN sublayer: x + FFN(LN(x)).
struct FeedForwardBlock {
    LayerNorm norm;
    FeedForward ffn;

    static FeedForwardBlock create(ParamStore &s, const std::string &name, Eigen::Index width, Eigen::Index hidden,
                                   Rng &rng);
    Var operator()(Tape &t, Var x) const { return add(t, x, ffn(t, norm(t, x))); }
};

/// x + SelfAttn(LN(x)), then the FFN block.
struct EncoderLayer {
    LayerNorm norm;
    MultiHeadAttention attn;
    FeedForwardBlock ffn;

    static EncoderLayer create(ParamStore &s, const std::string &name, Eigen::Index width, int heads,
                               Eigen::Index hidden, Rng &rng);
    Var operator()(Tape &t, Var x, const AttentionMask &mask, std::vector<Mat> *probs = nullptr) const;
};

/// x + CrossAttn(LN(x), memory), then the FFN block. No self-attention, so
/// every query row is processed independently.
struct CrossLayer {
    LayerNorm norm;
    MultiHeadAttention attn;
    FeedForwardBlock ffn;

    static CrossLayer create(ParamStore &s, const std::string &name, Eigen::Index width, int heads,
                             Eigen::Index hidden, Rng &rng);
    Var operator()(Tape &t, Var x, Var memory, const AttentionMask &mask) const;
};

/// Causal self-attention, cross-attention to memory, FFN; all pre-norm.
struct DecoderLayer {
    LayerNorm self_norm;
    MultiHeadAttention self_attn;
    LayerNorm cross_norm;
    MultiHeadAttention cross_attn;
    FeedForwardBlock ffn;

    static DecoderLayer create(ParamStore &s, const std::string &name, Eigen::Index width, int heads,
                               Eigen::Index hidden, Rng &rng);
    Var operator()(Tape &t, Var x, Var memory, const AttentionMask &memory_mask) const;
};

}  // namespace prose::nn
