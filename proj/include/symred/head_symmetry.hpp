#pragma once

#include <cstddef>
#include <vector>

#include "symred/attention.hpp"
#include "symred/matrix.hpp"

namespace symred {

/// Orbit-invariant coordinates of one head: g_qk = w_q^T w_k and
/// g_vo = w_o w_v, both d x d with rank at most d_h. Construction verifies
/// the rank bound via the singular-value tail.
class InvariantComposites {
public:
    InvariantComposites(Matrix g_qk, Matrix g_vo, std::size_t d_h);

    const Matrix& g_qk() const noexcept { return g_qk_; }
    const Matrix& g_vo() const noexcept { return g_vo_; }
    std::size_t d_h() const noexcept { return d_h_; }

private:
    Matrix g_qk_, g_vo_;
    std::size_t d_h_;
};

/// Ordered heads sharing (d, d_h).
class MultiHeadParams {
public:
    explicit MultiHeadParams(std::vector<HeadParams> heads);

    std::size_t head_count() const noexcept { return heads_.size(); }
    const std::vector<HeadParams>& heads() const noexcept { return heads_; }

private:
    std::vector<HeadParams> heads_;
};

/// Orthonormal basis of the symmetry-orbit tangent space at a parameter
/// point, in the fixed vectorization order (w_q, w_k, w_v, w_o) row-major.
/// The column count can drop below the nominal d_h(d_h-1)/2 + d_h^2 at
/// non-generic points.
struct TangentBasis {
    Matrix t;  // P x K, orthonormal columns, P = 4 * d * d_h
};

/// Balancedness matrices conserved under idealized gradient flow:
/// q_qk = w_q w_q^T - w_k w_k^T and q_vo = w_v w_v^T - w_o^T w_o.
struct Charges {
    Matrix q_qk;  // d_h x d_h, symmetric
    Matrix q_vo;  // d_h x d_h, symmetric
};

/// Canonicalization result; `degenerate` marks points where the canonical
/// representative is not unique (rank deficiency or near-ties in the
/// spectrum). For the QK gauge a degenerate input is returned unchanged.
struct CanonicalHead {
    HeadParams params;
    bool degenerate = false;
};

Matrix composite_qk(const HeadParams& p);
Matrix composite_vo(const HeadParams& p);

InvariantComposites composites(const HeadParams& p);

/// Shared head-space rotation (s w_q, s w_k); rejects non-orthogonal s.
HeadParams act_qk(const HeadParams& p, const Matrix& s);

/// Value-output re-factorization (s^{-1} w_v, w_o s); rejects s with
/// condition number above 1e6.
HeadParams act_vo(const HeadParams& p, const Matrix& s);

/// Reorders heads: result head i is input head sigma[i]. sigma must be a
/// permutation of {0..H-1}.
MultiHeadParams permute_heads(const MultiHeadParams& mp, const std::vector<std::size_t>& sigma);

/// Summed output of all heads.
TokenMatrix multi_head_forward(const TokenMatrix& x, const MultiHeadParams& mp,
                               bool causal = false);

/// Balanced gauge from the truncated SVD of the composite: w_o = U sigma^1/2,
/// w_v = sigma^1/2 V^T. The resulting q_vo charge vanishes.
CanonicalHead canonicalize_vo(const HeadParams& p);

/// Left-SVD gauge of w_q: rotates the head space so w_q = sigma V^T. A
/// rank-deficient or non-simple w_q spectrum leaves the head unchanged with
/// the degenerate flag set.
CanonicalHead canonicalize_qk(const HeadParams& p);

/// Orthonormal basis of the orbit directions: d_h(d_h-1)/2 antisymmetric QK
/// generators (A w_q, A w_k, 0, 0) and d_h^2 VO generators (0, 0, -B w_v,
/// w_o B).
TangentBasis tangent_basis(const HeadParams& p);

Charges charges(const HeadParams& p);

/// Fixed vectorization of head parameters: w_q, w_k, w_v, w_o concatenated
/// row-major. The projector and all gradient vectors depend on this order.
std::vector<double> vectorize_head(const HeadParams& p);
HeadParams devectorize_head(const std::vector<double>& values, std::size_t d, std::size_t d_h);
std::size_t head_param_count(std::size_t d, std::size_t d_h);

}  // namespace symred
