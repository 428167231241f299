#pragma once

#include <array>
#include <cstddef>

#include "symred/linalg.hpp"
#include "symred/matrix.hpp"

namespace symred {

/// Token states of one layer: n rows, one d-dimensional vector per token.
class TokenMatrix {
public:
    explicit TokenMatrix(Matrix x);

    std::size_t n() const noexcept { return x_.rows(); }
    std::size_t d() const noexcept { return x_.cols(); }
    const Matrix& matrix() const noexcept { return x_; }

private:
    Matrix x_;
};

/// Symmetric positive-semidefinite relational state of pairwise token inner
/// products. Construction validates symmetry and the spectrum.
class GramMatrix {
public:
    explicit GramMatrix(Matrix g);

    std::size_t n() const noexcept { return g_.rows(); }
    const Matrix& matrix() const noexcept { return g_; }

private:
    Matrix g_;
};

/// Frame-invariant representative of a token matrix together with the
/// orthogonal frame that produced it. `degenerate` marks inputs where the
/// representative is only defined up to a residual freedom (non-simple
/// spectrum or rank below d).
struct DressedState {
    Matrix x_hat;  // n x d
    Matrix u;      // d x d, orthogonal
    bool degenerate = false;
};

/// Pairwise inner products g_ij = <row_i, row_j>.
GramMatrix gram(const TokenMatrix& x);

/// (g_ij, g_ii, g_jj); throws std::out_of_range on bad indices.
std::array<double, 3> relational_triple(const GramMatrix& g, std::size_t i, std::size_t j);

/// Right-SVD dressing: u = V^T from the deterministic SVD of x, and
/// x_hat = x * V. Degeneracy is flagged, never fatal.
DressedState dress(const TokenMatrix& x);

/// Frobenius discrepancy between gram(x_hat) and gram(x); vanishes up to
/// roundoff because dressing is right-multiplication by an orthogonal frame.
double gram_residual(const TokenMatrix& x);

}  // namespace symred
