#include "symred/head_symmetry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "symred/linalg.hpp"

namespace symred {

namespace {

void verify_rank_bound(const Matrix& m, std::size_t d_h, const char* what) {
    const SvdResult r = svd_deterministic(m);
    if (d_h < r.sigma.size() && r.sigma[d_h] > 1e-9 * r.sigma.front()) {
        throw std::invalid_argument(std::string(what) + ": singular-value tail exceeds rank bound");
    }
}

Matrix symmetric_product_diff(const Matrix& a, const Matrix& b) {
    // a a^T - b b^T, built entrywise so exact symmetry holds; the two
    // products are accumulated separately so equal factors cancel exactly
    const std::size_t n = a.rows();
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double pos = 0.0;
            double neg = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                pos += a(i, k) * a(j, k);
            }
            for (std::size_t k = 0; k < b.cols(); ++k) {
                neg += b(i, k) * b(j, k);
            }
            out(i, j) = pos - neg;
            out(j, i) = pos - neg;
        }
    }
    return out;
}

}  // namespace

InvariantComposites::InvariantComposites(Matrix g_qk, Matrix g_vo, std::size_t d_h)
    : g_qk_(std::move(g_qk)), g_vo_(std::move(g_vo)), d_h_(d_h) {
    if (g_qk_.rows() != g_qk_.cols() || !g_qk_.same_shape(g_vo_)) {
        throw std::invalid_argument("InvariantComposites: composites must be square and same-shape");
    }
    verify_rank_bound(g_qk_, d_h_, "InvariantComposites g_qk");
    verify_rank_bound(g_vo_, d_h_, "InvariantComposites g_vo");
}

MultiHeadParams::MultiHeadParams(std::vector<HeadParams> heads) : heads_(std::move(heads)) {
    if (heads_.empty()) {
        throw std::invalid_argument("MultiHeadParams: at least one head required");
    }
    for (const HeadParams& h : heads_) {
        if (h.d() != heads_.front().d() || h.d_h() != heads_.front().d_h()) {
            throw std::invalid_argument("MultiHeadParams: heads disagree on (d, d_h)");
        }
    }
}

Matrix composite_qk(const HeadParams& p) {
    return p.w_q().transposed() * p.w_k();
}

Matrix composite_vo(const HeadParams& p) {
    return p.w_o() * p.w_v();
}

InvariantComposites composites(const HeadParams& p) {
    return InvariantComposites(composite_qk(p), composite_vo(p), p.d_h());
}

HeadParams act_qk(const HeadParams& p, const Matrix& s) {
    if (s.rows() != p.d_h() || s.cols() != p.d_h()) {
        throw std::invalid_argument("act_qk: s must be d_h x d_h");
    }
    if (frobenius_distance(s.transposed() * s, Matrix::identity(p.d_h())) > 1e-10) {
        throw std::invalid_argument("act_qk: s is not orthogonal");
    }
    return HeadParams(s * p.w_q(), s * p.w_k(), p.w_v(), p.w_o());
}

HeadParams act_vo(const HeadParams& p, const Matrix& s) {
    if (s.rows() != p.d_h() || s.cols() != p.d_h()) {
        throw std::invalid_argument("act_vo: s must be d_h x d_h");
    }
    if (!(condition_number(s) <= 1e6)) {
        throw std::invalid_argument("act_vo: s is singular or too ill-conditioned");
    }
    return HeadParams(p.w_q(), p.w_k(), inverse(s) * p.w_v(), p.w_o() * s);
}

MultiHeadParams permute_heads(const MultiHeadParams& mp, const std::vector<std::size_t>& sigma) {
    const std::size_t h = mp.head_count();
    if (sigma.size() != h) {
        throw std::invalid_argument("permute_heads: permutation length mismatch");
    }
    std::vector<bool> seen(h, false);
    for (std::size_t idx : sigma) {
        if (idx >= h || seen[idx]) {
            throw std::invalid_argument("permute_heads: not a permutation");
        }
        seen[idx] = true;
    }
    std::vector<HeadParams> reordered;
    reordered.reserve(h);
    for (std::size_t i = 0; i < h; ++i) {
        reordered.push_back(mp.heads()[sigma[i]]);
    }
    return MultiHeadParams(std::move(reordered));
}

TokenMatrix multi_head_forward(const TokenMatrix& x, const MultiHeadParams& mp, bool causal) {
    Matrix sum(x.n(), x.d());
    for (const HeadParams& head : mp.heads()) {
        sum += dot_head_forward(x, head, causal).tokens.matrix();
    }
    return TokenMatrix(std::move(sum));
}

CanonicalHead canonicalize_vo(const HeadParams& p) {
    const std::size_t d = p.d();
    const std::size_t dh = p.d_h();
    const Matrix g = composite_vo(p);
    const SvdResult r = svd_deterministic(g);

    const std::size_t keep = std::min(dh, r.sigma.size());
    Matrix w_o(d, dh);
    Matrix w_v(dh, d);
    for (std::size_t k = 0; k < keep; ++k) {
        const double root = std::sqrt(r.sigma[k]);
        for (std::size_t i = 0; i < d; ++i) {
            w_o(i, k) = r.u(i, k) * root;
            w_v(k, i) = root * r.v(i, k);
        }
    }

    std::vector<double> head(r.sigma.begin(),
                             r.sigma.begin() + std::min(r.sigma.size(), dh + 1));
    const bool degenerate = !simple_spectrum(head);
    return {HeadParams(p.w_q(), p.w_k(), std::move(w_v), std::move(w_o)), degenerate};
}

CanonicalHead canonicalize_qk(const HeadParams& p) {
    SvdResult r = svd_deterministic(p.w_q());
    const double s_max = r.sigma.front();
    const bool rank_deficient = (r.sigma.size() < p.d_h()) || (s_max == 0.0) ||
                                (r.sigma.back() <= 1e-12 * s_max);
    if (rank_deficient || !simple_spectrum(r.sigma)) {
        return {p, true};
    }
    // Re-anchor the residual column signs on V. The kernel pins them on U,
    // which a left head-space rotation moves; V is the invariant factor here,
    // so anchoring on it is what makes orbit-related heads collapse to the
    // same representative.
    for (std::size_t k = 0; k < r.sigma.size(); ++k) {
        std::size_t pivot = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < r.v.rows(); ++i) {
            const double mag = std::fabs(r.v(i, k));
            if (mag > best) {
                best = mag;
                pivot = i;
            }
        }
        if (r.v(pivot, k) < 0.0) {
            for (std::size_t i = 0; i < r.v.rows(); ++i) {
                r.v(i, k) = -r.v(i, k);
            }
            for (std::size_t i = 0; i < r.u.rows(); ++i) {
                r.u(i, k) = -r.u(i, k);
            }
        }
    }
    const Matrix s = r.u.transposed();  // d_h x d_h
    return {HeadParams(s * p.w_q(), s * p.w_k(), p.w_v(), p.w_o()), false};
}

TangentBasis tangent_basis(const HeadParams& p) {
    const std::size_t d = p.d();
    const std::size_t dh = p.d_h();
    const std::size_t param_count = head_param_count(d, dh);
    const std::size_t nominal = dh * (dh - 1) / 2 + dh * dh;

    Matrix generators(param_count, nominal);
    std::size_t col = 0;

    // QK sector: antisymmetric generators A = E_rs - E_sr acting as
    // (A w_q, A w_k, 0, 0)
    for (std::size_t r = 0; r < dh; ++r) {
        for (std::size_t s = r + 1; s < dh; ++s) {
            std::size_t offset = 0;
            // d(w_q) = A w_q: row r gains w_q row s, row s loses w_q row r
            for (std::size_t j = 0; j < d; ++j) {
                generators(offset + r * d + j, col) = p.w_q()(s, j);
                generators(offset + s * d + j, col) = -p.w_q()(r, j);
            }
            offset += dh * d;
            for (std::size_t j = 0; j < d; ++j) {
                generators(offset + r * d + j, col) = p.w_k()(s, j);
                generators(offset + s * d + j, col) = -p.w_k()(r, j);
            }
            ++col;
        }
    }

    // VO sector: B = E_rs acting as (0, 0, -B w_v, w_o B)
    for (std::size_t r = 0; r < dh; ++r) {
        for (std::size_t s = 0; s < dh; ++s) {
            std::size_t offset = 2 * dh * d;
            // d(w_v) = -E_rs w_v: row r loses w_v row s
            for (std::size_t j = 0; j < d; ++j) {
                generators(offset + r * d + j, col) = -p.w_v()(s, j);
            }
            offset += dh * d;
            // d(w_o) = w_o E_rs: column s gains w_o column r
            for (std::size_t i = 0; i < d; ++i) {
                generators(offset + i * dh + s, col) = p.w_o()(i, r);
            }
            ++col;
        }
    }

    return TangentBasis{orthonormalize(generators, 1e-10)};
}

Charges charges(const HeadParams& p) {
    return {symmetric_product_diff(p.w_q(), p.w_k()),
            symmetric_product_diff(p.w_v(), p.w_o().transposed())};
}

std::vector<double> vectorize_head(const HeadParams& p) {
    std::vector<double> out;
    out.reserve(head_param_count(p.d(), p.d_h()));
    for (const Matrix* m : {&p.w_q(), &p.w_k(), &p.w_v(), &p.w_o()}) {
        out.insert(out.end(), m->entries().begin(), m->entries().end());
    }
    return out;
}

HeadParams devectorize_head(const std::vector<double>& values, std::size_t d, std::size_t d_h) {
    if (values.size() != head_param_count(d, d_h)) {
        throw std::invalid_argument("devectorize_head: size mismatch");
    }
    const std::size_t block = d * d_h;
    auto slice = [&](std::size_t start, std::size_t rows, std::size_t cols) {
        return Matrix(rows, cols,
                      std::vector<double>(values.begin() + start, values.begin() + start + rows * cols));
    };
    return HeadParams(slice(0, d_h, d), slice(block, d_h, d), slice(2 * block, d_h, d),
                      slice(3 * block, d, d_h));
}

std::size_t head_param_count(std::size_t d, std::size_t d_h) {
    return 4 * d * d_h;
}

}  // namespace symred
