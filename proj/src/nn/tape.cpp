#include "prose/nn/tape.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "prose/errors.hpp"

namespace prose::nn {

namespace {

void require(bool ok, const std::string &what) {
    if (!ok) throw ShapeMismatch(what);
}

std::string shape(const Mat &m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

}  // namespace

// ParamStore ----------------------------------------------------------------

Param &ParamStore::add(const std::string &name, Eigen::Index rows, Eigen::Index cols) {
    if (find(name)) throw Error("duplicate parameter '" + name + "'");
    params_.push_back(std::make_unique<Param>(name, rows, cols));
    return *params_.back();
}

Param *ParamStore::find(const std::string &name) {
    for (auto &p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

const Param *ParamStore::find(const std::string &name) const {
    for (const auto &p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

Param &ParamStore::at(const std::string &name) {
    if (auto *p = find(name)) return *p;
    throw Error("no parameter named '" + name + "'");
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto &p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
}

void ParamStore::zero_grad() {
    for (auto &p : params_) p->zero_grad();
}

double ParamStore::grad_norm() const {
    double s = 0.0;
    for (const auto &p : params_) s += p->grad.squaredNorm();
    return std::sqrt(s);
}

void init_uniform(Param &p, double bound, Rng &rng) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-bound, bound);
}

void init_uniform_fan_in(Param &p, Rng &rng) { init_uniform(p, 1.0 / std::sqrt(static_cast<double>(p.value.rows())), rng); }

// Tape ------------------------------------------------------------------------

Var Tape::constant(Mat value) { return push(std::move(value), nullptr); }

Var Tape::leaf(Mat value) {
    Var v = push(std::move(value), nullptr);
    if (recording_) grad(v);
    return v;
}

Var Tape::push(Mat value, Backward back) {
    Node n;
    n.value = std::move(value);
    if (recording_) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size() - 1)};
}

Mat &Tape::grad(Var v) {
    auto &n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::backward(Var out) {
    if (!recording_) throw Error("backward on a tape built without gradients");
    require(value(out).size() == 1, "backward needs a scalar output, got " + shape(value(out)));
    grad(out)(0, 0) += 1.0;
    for (int i = out.id; i >= 0; --i) {
        auto &n = nodes_[static_cast<std::size_t>(i)];
        if (n.back && n.grad.size() > 0) n.back(*this, i);
    }
}

Mat matmul(const Tape &t, const Mat &a, const Mat &b) {
    Mat c(a.rows(), b.cols());
    if (t.row_independent) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) c.row(i).noalias() = a.row(i) * b;
    } else {
        c.noalias() = a * b;
    }
    return c;
}

Mat matmul_bt(const Tape &t, const Mat &a, const Mat &b) {
    Mat c(a.rows(), b.rows());
    if (t.row_independent) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) c.row(i).noalias() = a.row(i) * b.transpose();
    } else {
        c.noalias() = a * b.transpose();
    }
    return c;
}

// Ops -------------------------------------------------------------------------

Var linear(Tape &t, Var x, Param &w, Param *b) {
    const Mat &xv = t.value(x);
    require(xv.cols() == w.value.rows(), "linear: input " + shape(xv) + " vs weight " + shape(w.value));
    Mat y = matmul(t, xv, w.value);
    if (b) y.rowwise() += b->value.row(0);
    return t.push(std::move(y), [x, &w, b](Tape &t, int self) {
        const Mat &gy = t.grad(Var{self});
        w.grad.noalias() += t.value(x).transpose() * gy;
        if (b) b->grad.row(0) += gy.colwise().sum();
        t.grad(x).noalias() += gy * w.value.transpose();
    });
}

Var add(Tape &t, Var a, Var b) {
    require(t.value(a).rows() == t.value(b).rows() && t.value(a).cols() == t.value(b).cols(),
            "add: " + shape(t.value(a)) + " vs " + shape(t.value(b)));
    return t.push(t.value(a) + t.value(b), [a, b](Tape &t, int self) {
        const Mat g = t.grad(Var{self});
        t.grad(a) += g;
        t.grad(b) += g;
    });
}

Var add_row(Tape &t, Var x, Param &row) {
    require(row.value.rows() == 1 && row.value.cols() == t.value(x).cols(), "add_row: width mismatch");
    Mat y = t.value(x);
    y.rowwise() += row.value.row(0);
    return t.push(std::move(y), [x, &row](Tape &t, int self) {
        const Mat &g = t.grad(Var{self});
        row.grad.row(0) += g.colwise().sum();
        t.grad(x) += g;
    });
}

Var add_constant(Tape &t, Var x, const Mat &c) {
    require(c.rows() == t.value(x).rows() && c.cols() == t.value(x).cols(), "add_constant: shape mismatch");
    return t.push(t.value(x) + c, [x](Tape &t, int self) { t.grad(x) += t.grad(Var{self}); });
}

Var scale(Tape &t, Var x, double s) {
    return t.push(s * t.value(x), [x, s](Tape &t, int self) { t.grad(x) += s * t.grad(Var{self}); });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Tape &t, Var x) {
    const Mat &xv = t.value(x);
    Mat y(xv.rows(), xv.cols());
    for (Eigen::Index i = 0; i < xv.size(); ++i) {
        const double v = xv.data()[i];
        y.data()[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
    }
    return t.push(std::move(y), [x](Tape &t, int self) {
        const Mat &xv = t.value(x);
        const Mat &gy = t.grad(Var{self});
        Mat &gx = t.grad(x);
        for (Eigen::Index i = 0; i < xv.size(); ++i) {
            const double v = xv.data()[i];
            const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
            const double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
            gx.data()[i] += gy.data()[i] * d;
        }
    });
}

Var layer_norm(Tape &t, Var x, Param &gamma, Param &beta, double eps) {
    const Mat &xv = t.value(x);
    const Eigen::Index n = xv.cols();
    require(gamma.value.cols() == n && beta.value.cols() == n, "layer_norm: width mismatch");
    Mat xhat(xv.rows(), n);
    Eigen::VectorXd rstd(xv.rows());
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
        const double mu = xv.row(i).mean();
        const double var = (xv.row(i).array() - mu).square().mean();
        rstd[i] = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (xv.row(i).array() - mu) * rstd[i];
    }
    Mat y = xhat.array().rowwise() * gamma.value.row(0).array();
    y.rowwise() += beta.value.row(0);
    return t.push(std::move(y), [x, &gamma, &beta, xhat = std::move(xhat), rstd = std::move(rstd)](Tape &t, int self) {
        const Mat &gy = t.grad(Var{self});
        gamma.grad.row(0) += (gy.array() * xhat.array()).colwise().sum().matrix();
        beta.grad.row(0) += gy.colwise().sum();
        Mat &gx = t.grad(x);
        for (Eigen::Index i = 0; i < gy.rows(); ++i) {
            const Eigen::RowVectorXd gh = gy.row(i).array() * gamma.value.row(0).array();
            const double m1 = gh.mean();
            const double m2 = (gh.array() * xhat.row(i).array()).mean();
            gx.row(i).array() += rstd[i] * (gh.array() - m1 - xhat.row(i).array() * m2);
        }
    });
}

Var embedding(Tape &t, const std::vector<std::int32_t> &ids, Param &table, double factor) {
    Mat y(static_cast<Eigen::Index>(ids.size()), table.value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table.value.rows()) throw UnknownToken("token id " + std::to_string(ids[i]));
        y.row(static_cast<Eigen::Index>(i)) = factor * table.value.row(ids[i]);
    }
    return t.push(std::move(y), [ids, &table, factor](Tape &t, int self) {
        const Mat &g = t.grad(Var{self});
        for (std::size_t i = 0; i < ids.size(); ++i) table.grad.row(ids[i]) += factor * g.row(static_cast<Eigen::Index>(i));
    });
}

Var concat_rows(Tape &t, Var a, Var b) {
    const Mat &av = t.value(a), &bv = t.value(b);
    require(av.cols() == bv.cols(), "concat_rows: " + shape(av) + " vs " + shape(bv));
    Mat y(av.rows() + bv.rows(), av.cols());
    y.topRows(av.rows()) = av;
    y.bottomRows(bv.rows()) = bv;
    const Eigen::Index na = av.rows(), nb = bv.rows();
    return t.push(std::move(y), [a, b, na, nb](Tape &t, int self) {
        const Mat g = t.grad(Var{self});
        t.grad(a) += g.topRows(na);
        t.grad(b) += g.bottomRows(nb);
    });
}

Var slice_rows(Tape &t, Var x, Eigen::Index begin, Eigen::Index count) {
    require(begin >= 0 && count >= 0 && begin + count <= t.value(x).rows(), "slice_rows: range out of bounds");
    return t.push(t.value(x).middleRows(begin, count), [x, begin, count](Tape &t, int self) {
        t.grad(x).middleRows(begin, count) += t.grad(Var{self});
    });
}

Var weighted_sum(Tape &t, Var a, double alpha, Var b, double beta) {
    require(t.value(a).size() == 1 && t.value(b).size() == 1, "weighted_sum needs scalars");
    Mat y(1, 1);
    y(0, 0) = alpha * t.scalar(a) + beta * t.scalar(b);
    return t.push(std::move(y), [a, alpha, b, beta](Tape &t, int self) {
        const double g = t.grad(Var{self})(0, 0);
        t.grad(a)(0, 0) += alpha * g;
        t.grad(b)(0, 0) += beta * g;
    });
}

bool AttentionMask::allowed(Eigen::Index i, Eigen::Index j) const {
    if (!key_padding.empty() && key_padding[static_cast<std::size_t>(j)]) return false;
    if (causal && j > i) return false;
    if (!query_segment.empty() && !key_segment.empty() &&
        query_segment[static_cast<std::size_t>(i)] != key_segment[static_cast<std::size_t>(j)])
        return false;
    return true;
}

Var attention(Tape &t, Var queries, Var context, const AttentionParams &p, const AttentionMask &mask,
              std::vector<Mat> *probs) {
    const Mat &xq = t.value(queries);
    const Mat &xc = t.value(context);
    const Eigen::Index width = p.wq->value.cols();
    require(p.heads > 0 && width % p.heads == 0, "attention: width not divisible by head count");
    require(xq.cols() == p.wq->value.rows() && xc.cols() == p.wk->value.rows() && xc.cols() == p.wv->value.rows(),
            "attention: inputs " + shape(xq) + ", " + shape(xc) + " vs weight " + shape(p.wq->value));
    const Eigen::Index nq = xq.rows(), nk = xc.rows();
    require(mask.key_padding.empty() || static_cast<Eigen::Index>(mask.key_padding.size()) == nk,
            "attention: key padding length");
    require(mask.query_segment.empty() || static_cast<Eigen::Index>(mask.query_segment.size()) == nq,
            "attention: query segment length");
    require(mask.key_segment.empty() || static_cast<Eigen::Index>(mask.key_segment.size()) == nk,
            "attention: key segment length");
    const Eigen::Index dk = width / p.heads;
    const double inv = 1.0 / std::sqrt(static_cast<double>(dk));

    Mat q = matmul(t, xq, p.wq->value);
    q.rowwise() += p.bq->value.row(0);
    Mat k = xc * p.wk->value;
    k.rowwise() += p.bk->value.row(0);
    Mat v = xc * p.wv->value;
    v.rowwise() += p.bv->value.row(0);

    // Mask pattern is shared by all heads.
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> allow(nq, nk);
    for (Eigen::Index i = 0; i < nq; ++i)
        for (Eigen::Index j = 0; j < nk; ++j) allow(i, j) = mask.allowed(i, j) ? 1 : 0;

    std::vector<Mat> ps(static_cast<std::size_t>(p.heads));
    Mat ctx(nq, width);
    for (int h = 0; h < p.heads; ++h) {
        const Mat qh = q.middleCols(h * dk, dk);
        const Mat kh = k.middleCols(h * dk, dk);
        Mat s = matmul_bt(t, qh, kh);
        Mat &ph = ps[static_cast<std::size_t>(h)];
        ph.resize(nq, nk);
        for (Eigen::Index i = 0; i < nq; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < nk; ++j)
                if (allow(i, j)) mx = std::max(mx, s(i, j) * inv);
            double z = 0.0;
            for (Eigen::Index j = 0; j < nk; ++j) {
                const double e = allow(i, j) ? std::exp(s(i, j) * inv - mx) : 0.0;
                ph(i, j) = e;
                z += e;
            }
            if (z > 0.0) ph.row(i) /= z;  // a row with every key hidden attends to nothing
        }
        ctx.middleCols(h * dk, dk) = matmul(t, ph, v.middleCols(h * dk, dk));
    }
    Mat out = matmul(t, ctx, p.wo->value);
    out.rowwise() += p.bo->value.row(0);
    if (probs) *probs = ps;

    if (!t.recording()) return t.push(std::move(out), nullptr);
    return t.push(std::move(out), [queries, context, p, dk, inv, q = std::move(q), k = std::move(k), v = std::move(v),
                                   ps = std::move(ps), ctx = std::move(ctx)](Tape &t, int self) {
        const Mat &gout = t.grad(Var{self});
        p.wo->grad.noalias() += ctx.transpose() * gout;
        p.bo->grad.row(0) += gout.colwise().sum();
        const Mat gctx = gout * p.wo->value.transpose();
        Mat gq(q.rows(), q.cols()), gk(k.rows(), k.cols()), gv(v.rows(), v.cols());
        for (int h = 0; h < p.heads; ++h) {
            const Mat &ph = ps[static_cast<std::size_t>(h)];
            const auto gc = gctx.middleCols(h * dk, dk);
            gv.middleCols(h * dk, dk).noalias() = ph.transpose() * gc;
            const Mat gp = gc * v.middleCols(h * dk, dk).transpose();
            const Eigen::VectorXd dot = (gp.array() * ph.array()).rowwise().sum();
            const Mat gs = ((gp.colwise() - dot).array() * ph.array() * inv).matrix();
            gq.middleCols(h * dk, dk).noalias() = gs * k.middleCols(h * dk, dk);
            gk.middleCols(h * dk, dk).noalias() = gs.transpose() * q.middleCols(h * dk, dk);
        }
        const Mat &xq = t.value(queries);
        const Mat &xc = t.value(context);
        p.wq->grad.noalias() += xq.transpose() * gq;
        p.bq->grad.row(0) += gq.colwise().sum();
        p.wk->grad.noalias() += xc.transpose() * gk;
        p.bk->grad.row(0) += gk.colwise().sum();
        p.wv->grad.noalias() += xc.transpose() * gv;
        p.bv->grad.row(0) += gv.colwise().sum();
        const Mat gxq = gq * p.wq->value.transpose();
        const Mat gxc = gk * p.wk->value.transpose() + gv * p.wv->value.transpose();
        t.grad(queries) += gxq;
        t.grad(context) += gxc;
    });
}

Var relative_squared_loss(Tape &t, Var pred, const Mat &target, const std::vector<std::uint8_t> &column_mask,
                          double eps) {
    const Mat &pv = t.value(pred);
    require(pv.rows() == target.rows() && pv.cols() == target.cols(),
            "relative_squared_loss: " + shape(pv) + " vs " + shape(target));
    require(static_cast<Eigen::Index>(column_mask.size()) == pv.cols(), "relative_squared_loss: mask width");
    Mat diff = pv - target;
    double num = 0.0, den = eps;
    for (Eigen::Index j = 0; j < pv.cols(); ++j) {
        if (!column_mask[static_cast<std::size_t>(j)]) {
            diff.col(j).setZero();
            continue;
        }
        num += diff.col(j).squaredNorm();
        den += target.col(j).squaredNorm();
    }
    Mat y(1, 1);
    y(0, 0) = num / den;
    return t.push(std::move(y), [pred, diff = std::move(diff), den](Tape &t, int self) {
        t.grad(pred) += (2.0 * t.grad(Var{self})(0, 0) / den) * diff;
    });
}

Var cross_entropy(Tape &t, Var logits, const std::vector<std::int32_t> &targets, std::int32_t pad_id) {
    const Mat &lv = t.value(logits);
    require(lv.rows() == static_cast<Eigen::Index>(targets.size()), "cross_entropy: length mismatch");
    Mat prob(lv.rows(), lv.cols());
    double total = 0.0;
    int count = 0;
    for (Eigen::Index i = 0; i < lv.rows(); ++i) {
        const double mx = lv.row(i).maxCoeff();
        prob.row(i) = (lv.row(i).array() - mx).exp();
        const double z = prob.row(i).sum();
        prob.row(i) /= z;
        const auto tgt = targets[static_cast<std::size_t>(i)];
        if (tgt == pad_id) continue;
        require(tgt >= 0 && tgt < lv.cols(), "cross_entropy: target id out of range");
        total += -(lv(i, tgt) - mx - std::log(z));
        ++count;
    }
    Mat y(1, 1);
    y(0, 0) = count ? total / count : 0.0;
    return t.push(std::move(y), [logits, targets, pad_id, count, prob = std::move(prob)](Tape &t, int self) {
        if (!count) return;
        const double g = t.grad(Var{self})(0, 0) / count;
        Mat &gl = t.grad(logits);
        for (Eigen::Index i = 0; i < prob.rows(); ++i) {
            const auto tgt = targets[static_cast<std::size_t>(i)];
            if (tgt == pad_id) continue;
            gl.row(i) += g * prob.row(i);
            gl(i, tgt) -= g;
        }
    });
}

Mat sinusoidal_pe(Eigen::Index length, Eigen::Index width) {
    Mat pe(length, width);
    for (Eigen::Index pos = 0; pos < length; ++pos) {
        for (Eigen::Index c = 0; c < width; ++c) {
            const double k = static_cast<double>(c / 2) * 2.0;
            const double angle = static_cast<double>(pos) / std::pow(10000.0, k / static_cast<double>(width));
            pe(pos, c) = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

}  // namespace prose::nn
