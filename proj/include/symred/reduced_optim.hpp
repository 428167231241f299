#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "symred/attention.hpp"
#include "symred/head_symmetry.hpp"
#include "symred/relational.hpp"

namespace symred {

/// Fixed teacher-student batch: deterministic inputs with matching targets.
class Batch {
public:
    Batch(std::vector<TokenMatrix> inputs, std::vector<TokenMatrix> targets);

    std::size_t size() const noexcept { return inputs_.size(); }
    const std::vector<TokenMatrix>& inputs() const noexcept { return inputs_; }
    const std::vector<TokenMatrix>& targets() const noexcept { return targets_; }

private:
    std::vector<TokenMatrix> inputs_;
    std::vector<TokenMatrix> targets_;
};

enum class Scheme { baseline_sgd, projected_sgd, invariant_descent, dressed_sgd };
enum class RankMode { project, factorized };

struct OptimizerConfig {
    Scheme scheme = Scheme::baseline_sgd;
    double learning_rate = 1e-2;
    std::size_t steps = 1;
    std::size_t redress_period = 10;  // dressed scheme only
    double fd_epsilon = 1e-5;
    RankMode rank_mode = RankMode::project;
};

/// Throws std::invalid_argument when rates/periods are out of range.
void validate(const OptimizerConfig& cfg);

/// Rank-bounded realization g_vo = a * b.
class FactorizedComposite {
public:
    FactorizedComposite(Matrix a, Matrix b);

    const Matrix& a() const noexcept { return a_; }
    const Matrix& b() const noexcept { return b_; }
    Matrix product() const { return a_ * b_; }

private:
    Matrix a_;  // d x d_h
    Matrix b_;  // d_h x d
};

/// Balanced split a = U sigma^1/2, b = sigma^1/2 V^T of the rank-d_h
/// truncated SVD.
FactorizedComposite balanced_factorization(const Matrix& g, std::size_t d_h);

using GradientVector = std::vector<double>;

/// Mean squared error of the dot-product head over the batch,
/// ||forward(X) - T||_F^2 / (n d) averaged over samples.
double model_loss(const HeadParams& p, const Batch& batch);

/// Exact gradient of model_loss in the fixed head vectorization order
/// (reverse mode through softmax attention and the linear maps).
GradientVector grad_analytic(const HeadParams& p, const Batch& batch);

/// Central finite differences, component by component.
GradientVector grad_fd(const HeadParams& p, const Batch& batch, double eps);

/// Central-difference gradient of an arbitrary scalar function; the oracle
/// behind every analytic-gradient claim.
GradientVector fd_gradient(const std::function<double(const GradientVector&)>& f,
                           const GradientVector& at, double eps);

/// Scorer parameters flattened as (layer1 row-major, layer1_bias,
/// layer2_weights, layer2_bias).
std::vector<double> vectorize_scorer(const ScalarScorer& f);
ScalarScorer devectorize_scorer(const std::vector<double>& values, std::size_t hidden_width);
std::size_t scorer_param_count(std::size_t hidden_width);

/// Mean squared error of the Gram-relational head over the batch.
double relational_model_loss(const ScalarScorer& f, const Batch& batch, double tau);
GradientVector scorer_grad_analytic(const ScalarScorer& f, const Batch& batch, double tau);
GradientVector scorer_grad_fd(const ScalarScorer& f, const Batch& batch, double tau, double eps);

/// Forward pass in invariant coordinates: scores x_i^T g_qk x_j / sqrt(d_h),
/// output Y = A X g_vo^T. Coincides with dot_head_forward when the
/// composites come from a factored head.
ForwardResult invariant_forward(const TokenMatrix& x, const Matrix& g_qk, const Matrix& g_vo,
                                std::size_t d_h);

double invariant_model_loss(const Matrix& g_qk, const Matrix& g_vo, std::size_t d_h,
                            const Batch& batch);

struct CompositeGrads {
    Matrix g_qk;
    Matrix g_vo;
};

CompositeGrads invariant_grad_analytic(const Matrix& g_qk, const Matrix& g_vo, std::size_t d_h,
                                       const Batch& batch);

/// g minus its components along the tangent columns: g - t (t^T g).
GradientVector project_gradient(const GradientVector& g, const TangentBasis& t);

/// Plain descent step theta - eta * g.
HeadParams apply_step(const HeadParams& p, const GradientVector& g, double eta);

/// Descent step with the orbit-tangent component of g removed; the core of
/// step_projected, exposed so synthetic gradients can be injected.
HeadParams apply_projected_step(const HeadParams& p, const GradientVector& g, double eta);

HeadParams step_baseline(const HeadParams& p, const Batch& batch, const OptimizerConfig& cfg);
HeadParams step_projected(const HeadParams& p, const Batch& batch, const OptimizerConfig& cfg);

/// Gradient step on g_vo staying on the rank-<= d_h set: either an ambient
/// step followed by truncated-SVD projection, or one step on a balanced
/// (a, b) factorization.
Matrix step_invariant_vo(const Matrix& g_vo, const Matrix& grad_g, double eta, std::size_t d_h,
                         RankMode mode);

/// In-place factored step with chain-rule gradients grad_a = grad_g b^T,
/// grad_b = a^T grad_g.
FactorizedComposite step_factorized(const FactorizedComposite& fc, const Matrix& grad_g,
                                    double eta);

/// Gradient step on g_qk; projected to rank <= d_h only when d_h < d.
Matrix step_invariant_qk(const Matrix& g_qk, const Matrix& grad_g, double eta, std::size_t d_h,
                         std::size_t d);

/// Plain step plus periodic re-dressing to the canonical gauges.
HeadParams step_dressed(const HeadParams& p, const Batch& batch, const OptimizerConfig& cfg,
                        std::size_t step_index);

/// Runs plain gradient descent and returns the largest excursion of each
/// charge from its initial value, (max ||q_qk(t) - q_qk(0)||_F,
/// max ||q_vo(t) - q_vo(0)||_F).
std::pair<double, double> charge_drift(const HeadParams& p0, const Batch& batch, double eta,
                                       std::size_t steps);

}  // namespace symred
