#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "symred/matrix.hpp"
#include "symred/relational.hpp"

namespace symred {

/// One attention head's projections: w_q, w_k, w_v map model space to head
/// space (d_h x d); w_o maps back (d x d_h).
class HeadParams {
public:
    HeadParams(Matrix w_q, Matrix w_k, Matrix w_v, Matrix w_o);

    std::size_t d() const noexcept { return w_q_.cols(); }
    std::size_t d_h() const noexcept { return w_q_.rows(); }

    const Matrix& w_q() const noexcept { return w_q_; }
    const Matrix& w_k() const noexcept { return w_k_; }
    const Matrix& w_v() const noexcept { return w_v_; }
    const Matrix& w_o() const noexcept { return w_o_; }

private:
    Matrix w_q_, w_k_, w_v_, w_o_;
};

/// One-hidden-layer tanh scorer f: R^3 -> R applied pointwise to relational
/// triples.
class ScalarScorer {
public:
    ScalarScorer(Matrix layer1_weights, std::vector<double> layer1_bias,
                 std::vector<double> layer2_weights, double layer2_bias);

    std::size_t hidden_width() const noexcept { return layer1_weights_.rows(); }
    const Matrix& layer1_weights() const noexcept { return layer1_weights_; }
    const std::vector<double>& layer1_bias() const noexcept { return layer1_bias_; }
    const std::vector<double>& layer2_weights() const noexcept { return layer2_weights_; }
    double layer2_bias() const noexcept { return layer2_bias_; }

private:
    Matrix layer1_weights_;  // h x 3
    std::vector<double> layer1_bias_;
    std::vector<double> layer2_weights_;
    double layer2_bias_;
};

/// Row-stochastic attention matrix. Masked positions may be exactly zero;
/// unmasked softmax outputs are strictly positive.
class AttentionWeights {
public:
    explicit AttentionWeights(Matrix a);

    std::size_t n() const noexcept { return a_.rows(); }
    const Matrix& matrix() const noexcept { return a_; }

private:
    Matrix a_;
};

struct ForwardResult {
    TokenMatrix tokens;
    AttentionWeights weights;
};

/// Numerically stable row softmax (row-max subtraction).
Matrix row_softmax(const Matrix& scores);

/// Replaces strictly-upper entries (key index past the query index) with a
/// large negative sentinel; applied to scores before softmax. The sentinel
/// (-1e30) underflows to exactly zero weight and avoids inf - inf.
Matrix causal_mask(const Matrix& scores);

/// Scaled dot-product head: scores (w_q x_i)^T (w_k x_j) / sqrt(d_h),
/// row-softmax, value aggregation, output projection.
ForwardResult dot_head_forward(const TokenMatrix& x, const HeadParams& p, bool causal = false);

/// layer2^T tanh(layer1 * triple + bias1) + bias2.
double scorer_eval(const ScalarScorer& f, const std::array<double, 3>& triple);

/// Gram-relational head: scores f(g_ij, g_ii, g_jj) / tau, row-softmax,
/// output Y = A * X. Weights are invariant and Y equivariant under
/// right-orthogonal frame changes of X.
ForwardResult relational_forward(const TokenMatrix& x, const ScalarScorer& f, double tau,
                                 bool causal = false);

/// Invariant state update G+ = A G A^T.
GramMatrix propagate_gram(const AttentionWeights& a, const GramMatrix& g);

}  // namespace symred
