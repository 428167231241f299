#include "symred/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace symred {

namespace {

constexpr double kMaskSentinel = -1e30;

void require_finite_vector(const std::vector<double>& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument(std::string(what) + ": non-finite entry");
        }
    }
}

}  // namespace

HeadParams::HeadParams(Matrix w_q, Matrix w_k, Matrix w_v, Matrix w_o)
    : w_q_(std::move(w_q)), w_k_(std::move(w_k)), w_v_(std::move(w_v)), w_o_(std::move(w_o)) {
    const std::size_t dh = w_q_.rows();
    const std::size_t dm = w_q_.cols();
    if (dh < 1 || dm < 1) {
        throw std::invalid_argument("HeadParams: dimensions must be >= 1");
    }
    if (w_k_.rows() != dh || w_k_.cols() != dm || w_v_.rows() != dh || w_v_.cols() != dm ||
        w_o_.rows() != dm || w_o_.cols() != dh) {
        throw std::invalid_argument("HeadParams: inconsistent projection shapes");
    }
}

ScalarScorer::ScalarScorer(Matrix layer1_weights, std::vector<double> layer1_bias,
                           std::vector<double> layer2_weights, double layer2_bias)
    : layer1_weights_(std::move(layer1_weights)),
      layer1_bias_(std::move(layer1_bias)),
      layer2_weights_(std::move(layer2_weights)),
      layer2_bias_(layer2_bias) {
    if (layer1_weights_.rows() < 1 || layer1_weights_.cols() != 3) {
        throw std::invalid_argument("ScalarScorer: layer1 must be h x 3 with h >= 1");
    }
    if (layer1_bias_.size() != layer1_weights_.rows() ||
        layer2_weights_.size() != layer1_weights_.rows()) {
        throw std::invalid_argument("ScalarScorer: bias/output widths do not match hidden width");
    }
    require_finite_vector(layer1_bias_, "ScalarScorer layer1_bias");
    require_finite_vector(layer2_weights_, "ScalarScorer layer2_weights");
    if (!std::isfinite(layer2_bias_)) {
        throw std::invalid_argument("ScalarScorer: non-finite layer2_bias");
    }
}

AttentionWeights::AttentionWeights(Matrix a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols()) {
        throw std::invalid_argument("AttentionWeights: matrix must be square");
    }
    for (std::size_t i = 0; i < a_.rows(); ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < a_.cols(); ++j) {
            const double w = a_(i, j);
            if (w < -1e-12 || w > 1.0 + 1e-12) {
                throw std::invalid_argument("AttentionWeights: entry outside [0, 1]");
            }
            row_sum += w;
        }
        if (std::fabs(row_sum - 1.0) > 1e-12) {
            throw std::invalid_argument("AttentionWeights: row does not sum to 1");
        }
    }
}

Matrix row_softmax(const Matrix& scores) {
    Matrix out(scores.rows(), scores.cols());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        double mx = scores(i, 0);
        for (std::size_t j = 1; j < scores.cols(); ++j) {
            mx = std::max(mx, scores(i, j));
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < scores.cols(); ++j) {
            const double e = std::exp(scores(i, j) - mx);
            out(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < scores.cols(); ++j) {
            out(i, j) /= sum;
        }
    }
    return out;
}

Matrix causal_mask(const Matrix& scores) {
    if (scores.rows() != scores.cols()) {
        throw std::invalid_argument("causal_mask: score matrix must be square");
    }
    Matrix out = scores;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = i + 1; j < out.cols(); ++j) {
            out(i, j) = kMaskSentinel;
        }
    }
    return out;
}

ForwardResult dot_head_forward(const TokenMatrix& x, const HeadParams& p, bool causal) {
    if (x.d() != p.d()) {
        throw std::invalid_argument("dot_head_forward: model dimension mismatch");
    }
    const Matrix& xm = x.matrix();
    const Matrix q = xm * p.w_q().transposed();  // n x d_h
    const Matrix k = xm * p.w_k().transposed();
    const Matrix v = xm * p.w_v().transposed();

    Matrix scores = q * k.transposed() * (1.0 / std::sqrt(static_cast<double>(p.d_h())));
    if (causal) {
        scores = causal_mask(scores);
    }
    const Matrix a = row_softmax(scores);
    const Matrix y = (a * v) * p.w_o().transposed();  // n x d
    return {TokenMatrix(y), AttentionWeights(a)};
}

double scorer_eval(const ScalarScorer& f, const std::array<double, 3>& triple) {
    double acc = f.layer2_bias();
    const Matrix& w1 = f.layer1_weights();
    for (std::size_t k = 0; k < f.hidden_width(); ++k) {
        const double z = w1(k, 0) * triple[0] + w1(k, 1) * triple[1] + w1(k, 2) * triple[2] +
                         f.layer1_bias()[k];
        acc += f.layer2_weights()[k] * std::tanh(z);
    }
    return acc;
}

ForwardResult relational_forward(const TokenMatrix& x, const ScalarScorer& f, double tau,
                                 bool causal) {
    if (tau <= 0.0) {
        throw std::invalid_argument("relational_forward: tau must be positive");
    }
    const GramMatrix g = gram(x);
    const std::size_t n = x.n();
    Matrix scores(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            scores(i, j) = scorer_eval(f, relational_triple(g, i, j)) / tau;
        }
    }
    if (causal) {
        scores = causal_mask(scores);
    }
    const Matrix a = row_softmax(scores);
    return {TokenMatrix(a * x.matrix()), AttentionWeights(a)};
}

GramMatrix propagate_gram(const AttentionWeights& a, const GramMatrix& g) {
    if (a.n() != g.n()) {
        throw std::invalid_argument("propagate_gram: shape mismatch");
    }
    const Matrix raw = a.matrix() * g.matrix() * a.matrix().transposed();
    // symmetrize away accumulation-order roundoff
    Matrix sym(raw.rows(), raw.cols());
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        for (std::size_t j = 0; j < raw.cols(); ++j) {
            sym(i, j) = 0.5 * (raw(i, j) + raw(j, i));
        }
    }
    return GramMatrix(std::move(sym));
}

}  // namespace symred
