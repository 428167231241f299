#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "symred/matrix.hpp"

namespace symred {

/// Deterministic Gaussian stream: mt19937_64 plus a hand-rolled Box-Muller
/// transform, so a fixed seed yields the same values on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double gaussian();

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// Mixes (base, index) into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0);

/// Thin SVD m = u * diag(sigma) * v^T with r = min(rows, cols).
struct SvdResult {
    Matrix u;                   // rows x r, orthonormal columns
    std::vector<double> sigma;  // r nonnegative values, nonincreasing
    Matrix v;                   // cols x r, orthonormal columns
};

/// One-sided Jacobi SVD with a fixed column-sign convention: in each u_k the
/// entry of largest magnitude is made nonnegative (ties break to the lowest
/// row index) and v_k is flipped jointly. Throws on non-convergence.
SvdResult svd_deterministic(const Matrix& m);

/// True when all consecutive gaps sigma_k - sigma_{k+1} exceed
/// rel_gap_tol * sigma_1. A zero leading value counts as degenerate.
bool simple_spectrum(const std::vector<double>& sigma, double rel_gap_tol = 1e-6);

/// Best Frobenius-norm approximation of rank <= rank (truncated SVD).
Matrix truncate_rank(const Matrix& m, std::size_t rank);

/// Haar-like orthogonal matrix: Gaussian fill, then two-pass Gram-Schmidt.
/// Deterministic for a fixed (dim, seed); both determinant signs occur.
Matrix random_orthogonal(std::size_t dim, std::uint64_t seed);

/// Invertible matrix with singular-value ratio at most condition_cap,
/// obtained by flooring the spectrum of a Gaussian draw.
Matrix random_invertible(std::size_t dim, std::uint64_t seed, double condition_cap);

/// Matrix exponential of an antisymmetric matrix via scaling-and-squaring of
/// the truncated series; the result is orthogonal. Rejects inputs with
/// ||a + a^T||_F > 1e-12.
Matrix exp_antisymmetric(const Matrix& a);

/// Gram-Schmidt with column dropping: returns orthonormal columns spanning
/// the numerical column space. A column whose residual norm is at most
/// tol * (its input norm) is dropped. Zero input yields a zero-width result.
Matrix orthonormalize(const Matrix& columns, double tol);

/// exp(entropy) of the normalized singular-value distribution; lies in
/// [1, min(rows, cols)]. Throws on the zero matrix.
double effective_rank(const Matrix& m);

/// Gauss-Jordan inverse with partial pivoting; throws on singular input.
Matrix inverse(const Matrix& m);

/// sigma_max / sigma_min; +inf when the smallest singular value is zero.
double condition_number(const Matrix& m);

/// Eigenvalues of a symmetric matrix (cyclic two-sided Jacobi), descending.
std::vector<double> symmetric_eigenvalues(const Matrix& m);

/// Extends orthonormal columns q (m x k) to an m x target orthonormal set by
/// deterministically sweeping standard basis vectors.
Matrix complete_orthonormal_columns(const Matrix& q, std::size_t target);

}  // namespace symred
