#include "symred/relational.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace symred {

TokenMatrix::TokenMatrix(Matrix x) : x_(std::move(x)) {
    if (x_.rows() < 1 || x_.cols() < 1) {
        throw std::invalid_argument("TokenMatrix: n and d must be >= 1");
    }
}

GramMatrix::GramMatrix(Matrix g) : g_(std::move(g)) {
    if (g_.rows() != g_.cols()) {
        throw std::invalid_argument("GramMatrix: matrix must be square");
    }
    for (std::size_t i = 0; i < g_.rows(); ++i) {
        for (std::size_t j = i + 1; j < g_.cols(); ++j) {
            if (std::fabs(g_(i, j) - g_(j, i)) > 1e-12) {
                throw std::invalid_argument("GramMatrix: matrix is not symmetric");
            }
        }
    }
    const auto eigs = symmetric_eigenvalues(g_);
    if (eigs.back() < -1e-9 * g_.trace()) {
        throw std::invalid_argument("GramMatrix: matrix is not positive semidefinite");
    }
}

GramMatrix gram(const TokenMatrix& x) {
    const Matrix& m = x.matrix();
    Matrix g(m.rows(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < m.cols(); ++k) {
                dot += m(i, k) * m(j, k);
            }
            g(i, j) = dot;
            g(j, i) = dot;
        }
    }
    return GramMatrix(std::move(g));
}

std::array<double, 3> relational_triple(const GramMatrix& g, std::size_t i, std::size_t j) {
    if (i >= g.n() || j >= g.n()) {
        throw std::out_of_range("relational_triple: index out of range");
    }
    const Matrix& m = g.matrix();
    return {m(i, j), m(i, i), m(j, j)};
}

DressedState dress(const TokenMatrix& x) {
    const std::size_t d = x.d();
    const SvdResult svd = svd_deterministic(x.matrix());
    const std::size_t r = svd.sigma.size();

    Matrix v_full = (r == d) ? svd.v : complete_orthonormal_columns(svd.v, d);

    DressedState out;
    out.x_hat = x.matrix() * v_full;
    out.u = v_full.transposed();

    const double s_max = svd.sigma.front();
    const bool rank_deficient =
        (r < d) || (s_max == 0.0) || (svd.sigma.back() <= 1e-12 * s_max);
    out.degenerate = rank_deficient || !simple_spectrum(svd.sigma);
    return out;
}

double gram_residual(const TokenMatrix& x) {
    const DressedState ds = dress(x);
    const GramMatrix original = gram(x);
    const GramMatrix dressed = gram(TokenMatrix(ds.x_hat));
    return frobenius_distance(dressed.matrix(), original.matrix());
}

}  // namespace symred
