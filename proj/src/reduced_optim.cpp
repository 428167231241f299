#include "symred/reduced_optim.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "symred/linalg.hpp"

namespace symred {

namespace {

Matrix softmax_backward(const Matrix& a, const Matrix& da) {
    Matrix ds(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            dot += da(i, j) * a(i, j);
        }
        for (std::size_t j = 0; j < a.cols(); ++j) {
            ds(i, j) = a(i, j) * (da(i, j) - dot);
        }
    }
    return ds;
}

double squared_error_scaled(const Matrix& y, const Matrix& target) {
    const double n = static_cast<double>(y.rows());
    const double d = static_cast<double>(y.cols());
    const double dist = frobenius_distance(y, target);
    return dist * dist / (n * d);
}

}  // namespace

Batch::Batch(std::vector<TokenMatrix> inputs, std::vector<TokenMatrix> targets)
    : inputs_(std::move(inputs)), targets_(std::move(targets)) {
    if (inputs_.empty() || inputs_.size() != targets_.size()) {
        throw std::invalid_argument("Batch: inputs and targets must be nonempty and matched");
    }
    for (std::size_t i = 0; i < inputs_.size(); ++i) {
        if (inputs_[i].n() != inputs_.front().n() || inputs_[i].d() != inputs_.front().d() ||
            targets_[i].n() != inputs_[i].n() || targets_[i].d() != inputs_[i].d()) {
            throw std::invalid_argument("Batch: inconsistent sample shapes");
        }
    }
}

void validate(const OptimizerConfig& cfg) {
    if (cfg.learning_rate <= 0.0) {
        throw std::invalid_argument("OptimizerConfig: learning_rate must be positive");
    }
    if (cfg.scheme == Scheme::dressed_sgd && cfg.redress_period < 1) {
        throw std::invalid_argument("OptimizerConfig: redress_period must be >= 1");
    }
    if (cfg.fd_epsilon <= 0.0) {
        throw std::invalid_argument("OptimizerConfig: fd_epsilon must be positive");
    }
}

FactorizedComposite::FactorizedComposite(Matrix a, Matrix b)
    : a_(std::move(a)), b_(std::move(b)) {
    if (a_.cols() != b_.rows() || a_.rows() != b_.cols()) {
        throw std::invalid_argument("FactorizedComposite: factors must be d x d_h and d_h x d");
    }
}

FactorizedComposite balanced_factorization(const Matrix& g, std::size_t d_h) {
    const SvdResult r = svd_deterministic(g);
    const std::size_t keep = std::min(d_h, r.sigma.size());
    Matrix a(g.rows(), d_h);
    Matrix b(d_h, g.cols());
    for (std::size_t k = 0; k < keep; ++k) {
        const double root = std::sqrt(r.sigma[k]);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            a(i, k) = r.u(i, k) * root;
        }
        for (std::size_t j = 0; j < g.cols(); ++j) {
            b(k, j) = root * r.v(j, k);
        }
    }
    return FactorizedComposite(std::move(a), std::move(b));
}

double model_loss(const HeadParams& p, const Batch& batch) {
    double total = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const ForwardResult fr = dot_head_forward(batch.inputs()[s], p);
        total += squared_error_scaled(fr.tokens.matrix(), batch.targets()[s].matrix());
    }
    return total / static_cast<double>(batch.size());
}

GradientVector grad_analytic(const HeadParams& p, const Batch& batch) {
    const std::size_t d = p.d();
    const std::size_t dh = p.d_h();
    Matrix d_wq(dh, d), d_wk(dh, d), d_wv(dh, d), d_wo(d, dh);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    for (std::size_t s = 0; s < batch.size(); ++s) {
        const Matrix& x = batch.inputs()[s].matrix();
        const Matrix& target = batch.targets()[s].matrix();
        const double nd = static_cast<double>(x.rows() * x.cols());

        const Matrix q = x * p.w_q().transposed();
        const Matrix k = x * p.w_k().transposed();
        const Matrix v = x * p.w_v().transposed();
        const Matrix a = row_softmax(q * k.transposed() * inv_scale);
        const Matrix h = a * v;
        const Matrix y = h * p.w_o().transposed();

        const Matrix dy = (y - target) * (2.0 / nd);
        d_wo += dy.transposed() * h;
        const Matrix dh_mat = dy * p.w_o();
        const Matrix da = dh_mat * v.transposed();
        const Matrix dv = a.transposed() * dh_mat;
        const Matrix ds = softmax_backward(a, da) * inv_scale;
        const Matrix dq = ds * k;
        const Matrix dk = ds.transposed() * q;

        d_wq += dq.transposed() * x;
        d_wk += dk.transposed() * x;
        d_wv += dv.transposed() * x;
    }

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    GradientVector g = vectorize_head(HeadParams(d_wq, d_wk, d_wv, d_wo));
    for (double& value : g) {
        value *= inv_batch;
    }
    return g;
}

GradientVector grad_fd(const HeadParams& p, const Batch& batch, double eps) {
    const std::size_t d = p.d();
    const std::size_t dh = p.d_h();
    auto loss = [&](const GradientVector& values) {
        return model_loss(devectorize_head(values, d, dh), batch);
    };
    return fd_gradient(loss, vectorize_head(p), eps);
}

GradientVector fd_gradient(const std::function<double(const GradientVector&)>& f,
                           const GradientVector& at, double eps) {
    if (eps <= 0.0) {
        throw std::invalid_argument("fd_gradient: eps must be positive");
    }
    GradientVector g(at.size());
    GradientVector probe = at;
    for (std::size_t i = 0; i < at.size(); ++i) {
        probe[i] = at[i] + eps;
        const double up = f(probe);
        probe[i] = at[i] - eps;
        const double down = f(probe);
        probe[i] = at[i];
        g[i] = (up - down) / (2.0 * eps);
    }
    return g;
}

std::vector<double> vectorize_scorer(const ScalarScorer& f) {
    std::vector<double> out;
    out.reserve(scorer_param_count(f.hidden_width()));
    out.insert(out.end(), f.layer1_weights().entries().begin(), f.layer1_weights().entries().end());
    out.insert(out.end(), f.layer1_bias().begin(), f.layer1_bias().end());
    out.insert(out.end(), f.layer2_weights().begin(), f.layer2_weights().end());
    out.push_back(f.layer2_bias());
    return out;
}

ScalarScorer devectorize_scorer(const std::vector<double>& values, std::size_t hidden_width) {
    if (values.size() != scorer_param_count(hidden_width)) {
        throw std::invalid_argument("devectorize_scorer: size mismatch");
    }
    const std::size_t h = hidden_width;
    Matrix w1(h, 3, std::vector<double>(values.begin(), values.begin() + 3 * h));
    std::vector<double> b1(values.begin() + 3 * h, values.begin() + 4 * h);
    std::vector<double> w2(values.begin() + 4 * h, values.begin() + 5 * h);
    return ScalarScorer(std::move(w1), std::move(b1), std::move(w2), values[5 * h]);
}

std::size_t scorer_param_count(std::size_t hidden_width) {
    return 5 * hidden_width + 1;
}

double relational_model_loss(const ScalarScorer& f, const Batch& batch, double tau) {
    double total = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const ForwardResult fr = relational_forward(batch.inputs()[s], f, tau);
        total += squared_error_scaled(fr.tokens.matrix(), batch.targets()[s].matrix());
    }
    return total / static_cast<double>(batch.size());
}

GradientVector scorer_grad_analytic(const ScalarScorer& f, const Batch& batch, double tau) {
    const std::size_t h = f.hidden_width();
    Matrix d_w1(h, 3);
    std::vector<double> d_b1(h, 0.0), d_w2(h, 0.0);
    double d_b2 = 0.0;

    for (std::size_t s = 0; s < batch.size(); ++s) {
        const Matrix& x = batch.inputs()[s].matrix();
        const Matrix& target = batch.targets()[s].matrix();
        const std::size_t n = x.rows();
        const double nd = static_cast<double>(x.rows() * x.cols());

        const GramMatrix g = gram(batch.inputs()[s]);
        Matrix scores(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                scores(i, j) = scorer_eval(f, relational_triple(g, i, j)) / tau;
            }
        }
        const Matrix a = row_softmax(scores);
        const Matrix y = a * x;

        const Matrix dy = (y - target) * (2.0 / nd);
        const Matrix da = dy * x.transposed();
        const Matrix ds = softmax_backward(a, da);

        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double upstream = ds(i, j) / tau;
                if (upstream == 0.0) {
                    continue;
                }
                const auto triple = relational_triple(g, i, j);
                for (std::size_t m = 0; m < h; ++m) {
                    const double z = f.layer1_weights()(m, 0) * triple[0] +
                                     f.layer1_weights()(m, 1) * triple[1] +
                                     f.layer1_weights()(m, 2) * triple[2] + f.layer1_bias()[m];
                    const double th = std::tanh(z);
                    d_w2[m] += upstream * th;
                    const double dz = upstream * f.layer2_weights()[m] * (1.0 - th * th);
                    d_w1(m, 0) += dz * triple[0];
                    d_w1(m, 1) += dz * triple[1];
                    d_w1(m, 2) += dz * triple[2];
                    d_b1[m] += dz;
                }
                d_b2 += upstream;
            }
        }
    }

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    GradientVector g = vectorize_scorer(ScalarScorer(d_w1, d_b1, d_w2, d_b2));
    for (double& value : g) {
        value *= inv_batch;
    }
    return g;
}

GradientVector scorer_grad_fd(const ScalarScorer& f, const Batch& batch, double tau, double eps) {
    const std::size_t h = f.hidden_width();
    auto loss = [&](const GradientVector& values) {
        return relational_model_loss(devectorize_scorer(values, h), batch, tau);
    };
    return fd_gradient(loss, vectorize_scorer(f), eps);
}

ForwardResult invariant_forward(const TokenMatrix& x, const Matrix& g_qk, const Matrix& g_vo,
                                std::size_t d_h) {
    if (g_qk.rows() != x.d() || g_qk.cols() != x.d() || g_vo.rows() != x.d() ||
        g_vo.cols() != x.d()) {
        throw std::invalid_argument("invariant_forward: composites must be d x d");
    }
    const Matrix& xm = x.matrix();
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d_h));
    const Matrix a = row_softmax(xm * g_qk * xm.transposed() * inv_scale);
    return {TokenMatrix((a * xm) * g_vo.transposed()), AttentionWeights(a)};
}

double invariant_model_loss(const Matrix& g_qk, const Matrix& g_vo, std::size_t d_h,
                            const Batch& batch) {
    double total = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const ForwardResult fr = invariant_forward(batch.inputs()[s], g_qk, g_vo, d_h);
        total += squared_error_scaled(fr.tokens.matrix(), batch.targets()[s].matrix());
    }
    return total / static_cast<double>(batch.size());
}

CompositeGrads invariant_grad_analytic(const Matrix& g_qk, const Matrix& g_vo, std::size_t d_h,
                                       const Batch& batch) {
    const std::size_t d = g_qk.rows();
    Matrix d_gqk(d, d), d_gvo(d, d);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d_h));

    for (std::size_t s = 0; s < batch.size(); ++s) {
        const Matrix& x = batch.inputs()[s].matrix();
        const Matrix& target = batch.targets()[s].matrix();
        const double nd = static_cast<double>(x.rows() * x.cols());

        const Matrix a = row_softmax(x * g_qk * x.transposed() * inv_scale);
        const Matrix z = a * x;
        const Matrix y = z * g_vo.transposed();

        const Matrix dy = (y - target) * (2.0 / nd);
        d_gvo += dy.transposed() * z;
        const Matrix dz = dy * g_vo;
        const Matrix da = dz * x.transposed();
        const Matrix ds = softmax_backward(a, da) * inv_scale;
        d_gqk += x.transposed() * ds * x;
    }

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    return {d_gqk * inv_batch, d_gvo * inv_batch};
}

GradientVector project_gradient(const GradientVector& g, const TangentBasis& t) {
    if (g.size() != t.t.rows()) {
        throw std::invalid_argument("project_gradient: dimension mismatch");
    }
    GradientVector out = g;
    for (std::size_t k = 0; k < t.t.cols(); ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            dot += t.t(i, k) * g[i];
        }
        for (std::size_t i = 0; i < g.size(); ++i) {
            out[i] -= dot * t.t(i, k);
        }
    }
    return out;
}

HeadParams apply_step(const HeadParams& p, const GradientVector& g, double eta) {
    GradientVector values = vectorize_head(p);
    if (values.size() != g.size()) {
        throw std::invalid_argument("apply_step: gradient dimension mismatch");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] -= eta * g[i];
    }
    return devectorize_head(values, p.d(), p.d_h());
}

HeadParams apply_projected_step(const HeadParams& p, const GradientVector& g, double eta) {
    return apply_step(p, project_gradient(g, tangent_basis(p)), eta);
}

HeadParams step_baseline(const HeadParams& p, const Batch& batch, const OptimizerConfig& cfg) {
    return apply_step(p, grad_analytic(p, batch), cfg.learning_rate);
}

HeadParams step_projected(const HeadParams& p, const Batch& batch, const OptimizerConfig& cfg) {
    if (cfg.scheme != Scheme::projected_sgd) {
        throw std::invalid_argument("step_projected: config scheme is not projected_sgd");
    }
    return apply_projected_step(p, grad_analytic(p, batch), cfg.learning_rate);
}

Matrix step_invariant_vo(const Matrix& g_vo, const Matrix& grad_g, double eta, std::size_t d_h,
                         RankMode mode) {
    if (eta <= 0.0) {
        throw std::invalid_argument("step_invariant_vo: eta must be positive");
    }
    if (mode == RankMode::project) {
        return truncate_rank(g_vo - eta * grad_g, d_h);
    }
    const FactorizedComposite fc = balanced_factorization(g_vo, d_h);
    return step_factorized(fc, grad_g, eta).product();
}

FactorizedComposite step_factorized(const FactorizedComposite& fc, const Matrix& grad_g,
                                    double eta) {
    const Matrix grad_a = grad_g * fc.b().transposed();
    const Matrix grad_b = fc.a().transposed() * grad_g;
    return FactorizedComposite(fc.a() - eta * grad_a, fc.b() - eta * grad_b);
}

Matrix step_invariant_qk(const Matrix& g_qk, const Matrix& grad_g, double eta, std::size_t d_h,
                         std::size_t d) {
    if (eta <= 0.0) {
        throw std::invalid_argument("step_invariant_qk: eta must be positive");
    }
    Matrix out = g_qk - eta * grad_g;
    if (d_h < d) {
        out = truncate_rank(out, d_h);
    }
    return out;
}

HeadParams step_dressed(const HeadParams& p, const Batch& batch, const OptimizerConfig& cfg,
                        std::size_t step_index) {
    if (cfg.scheme != Scheme::dressed_sgd) {
        throw std::invalid_argument("step_dressed: config scheme is not dressed_sgd");
    }
    HeadParams next = apply_step(p, grad_analytic(p, batch), cfg.learning_rate);
    if ((step_index + 1) % cfg.redress_period == 0) {
        next = canonicalize_vo(canonicalize_qk(next).params).params;
    }
    return next;
}

std::pair<double, double> charge_drift(const HeadParams& p0, const Batch& batch, double eta,
                                       std::size_t steps) {
    const Charges initial = charges(p0);
    double max_qk = 0.0;
    double max_vo = 0.0;
    HeadParams p = p0;
    for (std::size_t t = 0; t < steps; ++t) {
        p = apply_step(p, grad_analytic(p, batch), eta);
        const Charges current = charges(p);
        max_qk = std::max(max_qk, frobenius_distance(current.q_qk, initial.q_qk));
        max_vo = std::max(max_vo, frobenius_distance(current.q_vo, initial.q_vo));
    }
    return {max_qk, max_vo};
}

}  // namespace symred
