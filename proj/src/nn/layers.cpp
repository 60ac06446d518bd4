#include "prose/nn/layers.hpp"

namespace prose::nn {

Linear Linear::create(ParamStore &s, const std::string &name, Eigen::Index in, Eigen::Index out, Rng &rng,
                      bool bias) {
    Linear l;
    l.w = &s.add(name + ".weight", in, out);
    init_uniform_fan_in(*l.w, rng);
    if (bias) l.b = &s.add(name + ".bias", 1, out);
    return l;
}

LayerNorm LayerNorm::create(ParamStore &s, const std::string &name, Eigen::Index width) {
    LayerNorm n;
    n.gamma = &s.add(name + ".gamma", 1, width);
    n.gamma->value.setOnes();
    n.beta = &s.add(name + ".beta", 1, width);
    return n;
}

FeedForward FeedForward::create(ParamStore &s, const std::string &name, Eigen::Index width, Eigen::Index hidden,
                                Rng &rng) {
    return {Linear::create(s, name + ".in", width, hidden, rng), Linear::create(s, name + ".out", hidden, width, rng)};
}

MultiHeadAttention MultiHeadAttention::create(ParamStore &s, const std::string &name, Eigen::Index width, int heads,
                                              Rng &rng) {
    const auto q = Linear::create(s, name + ".query", width, width, rng);
    const auto k = Linear::create(s, name + ".key", width, width, rng);
    const auto v = Linear::create(s, name + ".value", width, width, rng);
    const auto o = Linear::create(s, name + ".output", width, width, rng);
    MultiHeadAttention m;
    m.p = {q.w, q.b, k.w, k.b, v.w, v.b, o.w, o.b, heads};
    return m;
}

FeedForwardBlock FeedForwardBlock::create(ParamStore &s, const std::string &name, Eigen::Index width,
                                          Eigen::Index hidden, Rng &rng) {
    return {LayerNorm::create(s, name + ".norm", width), FeedForward::create(s, name, width, hidden, rng)};
}

EncoderLayer EncoderLayer::create(ParamStore &s, const std::string &name, Eigen::Index width, int heads,
                                  Eigen::Index hidden, Rng &rng) {
    EncoderLayer l;
    l.norm = LayerNorm::create(s, name + ".attn_norm", width);
    l.attn = MultiHeadAttention::create(s, name + ".attn", width, heads, rng);
    l.ffn = FeedForwardBlock::create(s, name + ".ffn", width, hidden, rng);
    return l;
}

Var EncoderLayer::operator()(Tape &t, Var x, const AttentionMask &mask, std::vector<Mat> *probs) const {
    const Var h = norm(t, x);
    x = add(t, x, attn(t, h, h, mask, probs));
    return ffn(t, x);
}

CrossLayer CrossLayer::create(ParamStore &s, const std::string &name, Eigen::Index width, int heads,
                              Eigen::Index hidden, Rng &rng) {
    CrossLayer l;
    l.norm = LayerNorm::create(s, name + ".attn_norm", width);
    l.attn = MultiHeadAttention::create(s, name + ".attn", width, heads, rng);
    l.ffn = FeedForwardBlock::create(s, name + ".ffn", width, hidden, rng);
    return l;
}

Var CrossLayer::operator()(Tape &t, Var x, Var memory, const AttentionMask &mask) const {
    x = add(t, x, attn(t, norm(t, x), memory, mask));
    return ffn(t, x);
}

DecoderLayer DecoderLayer::create(ParamStore &s, const std::string &name, Eigen::Index width, int heads,
                                  Eigen::Index hidden, Rng &rng) {
    DecoderLayer l;
    l.self_norm = LayerNorm::create(s, name + ".self_norm", width);
    l.self_attn = MultiHeadAttention::create(s, name + ".self_attn", width, heads, rng);
    l.cross_norm = LayerNorm::create(s, name + ".cross_norm", width);
    l.cross_attn = MultiHeadAttention::create(s, name + ".cross_attn", width, heads, rng);
    l.ffn = FeedForwardBlock::create(s, name + ".ffn", width, hidden, rng);
    return l;
}

Var DecoderLayer::operator()(Tape &t, Var x, Var memory, const AttentionMask &memory_mask) const {
    AttentionMask causal;
    causal.causal = true;
    const Var h = self_norm(t, x);
    x = add(t, x, self_attn(t, h, h, causal));
    x = add(t, x, cross_attn(t, cross_norm(t, x), memory, memory_mask));
    return ffn(t, x);
}

}  // namespace prose::nn
