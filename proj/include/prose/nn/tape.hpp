#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "prose/rng.hpp"

namespace prose::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable tensor. Ops accumulate straight into `grad`.
struct Param {
    std::string name;
    Mat value;
    Mat grad;

    Param(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}
    void zero_grad() { grad.setZero(); }
};

/// Owns parameters in creation order; names are unique.
class ParamStore {
   public:
    Param &add(const std::string &name, Eigen::Index rows, Eigen::Index cols);
    Param *find(const std::string &name);
    const Param *find(const std::string &name) const;
    Param &at(const std::string &name);

    std::size_t size() const { return params_.size(); }
    Param &operator[](std::size_t i) { return *params_[i]; }
    const Param &operator[](std::size_t i) const { return *params_[i]; }
    std::size_t scalar_count() const;
    void zero_grad();
    double grad_norm() const;

   private:
    std::vector<std::unique_ptr<Param>> params_;
};

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform_fan_in(Param &p, Rng &rng);
void init_uniform(Param &p, double bound, Rng &rng);

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Each op pushes its output value and a closure that
/// propagates the output gradient to its inputs (and to parameters).
/// A tape built with grad = false records nothing and only computes values.
class Tape {
   public:
    using Backward = std::function<void(Tape &, int)>;

    explicit Tape(bool grad = true) : recording_(grad) {}

    bool recording() const { return recording_; }
    /// When set, every product whose rows are query rows is evaluated one row
    /// at a time so that a row's result never depends on its neighbours.
    bool row_independent = false;

    Var constant(Mat value);
    /// Input whose gradient is kept (used by gradient checks).
    Var leaf(Mat value);
    Var push(Mat value, Backward back);

    const Mat &value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    Mat &grad(Var v);
    bool has_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad.size() > 0; }
    double scalar(Var v) const { return value(v)(0, 0); }
    std::size_t size() const { return nodes_.size(); }

    /// Seeds d(out)/d(out) = 1 for a 1x1 output and runs every closure in
    /// reverse order.
    void backward(Var out);

   private:
    struct Node {
        Mat value;
        Mat grad;
        Backward back;
    };
    bool recording_;
    std::vector<Node> nodes_;
};

// Products that honour Tape::row_independent.
Mat matmul(const Tape &t, const Mat &a, const Mat &b);
Mat matmul_bt(const Tape &t, const Mat &a, const Mat &b);  // a * b^T

// ---------------------------------------------------------------------------
// Ops

Var linear(Tape &t, Var x, Param &w, Param *b);  // x W + b, W is in x out
Var add(Tape &t, Var a, Var b);
Var add_row(Tape &t, Var x, Param &row);         // x + row broadcast over rows
Var add_constant(Tape &t, Var x, const Mat &c);  // c carries no gradient
Var scale(Tape &t, Var x, double s);
Var gelu(Tape &t, Var x);
Var layer_norm(Tape &t, Var x, Param &gamma, Param &beta, double eps = 1e-5);
/// Rows of `table` selected by `ids`, multiplied by `factor`.
Var embedding(Tape &t, const std::vector<std::int32_t> &ids, Param &table, double factor = 1.0);
Var concat_rows(Tape &t, Var a, Var b);
Var slice_rows(Tape &t, Var x, Eigen::Index begin, Eigen::Index count);
/// alpha * a + beta * b for 1x1 values.
Var weighted_sum(Tape &t, Var a, double alpha, Var b, double beta);

struct AttentionMask {
    /// key_padding[j] != 0 hides key j. Empty means no padding.
    std::vector<std::uint8_t> key_padding;
    /// Query i sees keys j <= i.
    bool causal = false;
    /// When both are non-empty, query i only sees keys with the same segment id.
    std::vector<int> query_segment, key_segment;

    bool allowed(Eigen::Index i, Eigen::Index j) const;
};

struct AttentionParams {
    Param *wq = nullptr, *bq = nullptr, *wk = nullptr, *bk = nullptr;
    Param *wv = nullptr, *bv = nullptr, *wo = nullptr, *bo = nullptr;
    int heads = 1;
};

/// Multi-head softmax(Q K^T / sqrt(d_k)) V with Q from `queries` and K, V from
/// `context`, followed by the output projection. Passing the same Var twice
/// gives self-attention. If `probs` is non-null it receives one
/// (queries x keys) probability matrix per head. Throws ShapeMismatch.
Var attention(Tape &t, Var queries, Var context, const AttentionParams &p, const AttentionMask &mask,
              std::vector<Mat> *probs = nullptr);

/// Sum over masked-in columns of |pred - target|^2 / (|target|^2 + eps), as a 1x1.
Var relative_squared_loss(Tape &t, Var pred, const Mat &target, const std::vector<std::uint8_t> &column_mask,
                          double eps = 1e-8);
/// Mean over non-pad rows of -log softmax(logits)[target].
Var cross_entropy(Tape &t, Var logits, const std::vector<std::int32_t> &targets, std::int32_t pad_id);

/// Row i: sin(i / 10000^(2k/width)) at column 2k, cos(...) at column 2k+1.
Mat sinusoidal_pe(Eigen::Index length, Eigen::Index width);

}  // namespace prose::nn
