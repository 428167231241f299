#include "symred/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace symred {

namespace {

constexpr int kJacobiSweepCap = 100;
constexpr double kJacobiTol = 1e-14;

double column_dot(const Matrix& m, std::size_t p, std::size_t q) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        sum += m(i, p) * m(i, q);
    }
    return sum;
}

void rotate_columns(Matrix& m, std::size_t p, std::size_t q, double c, double s) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double vp = m(i, p);
        const double vq = m(i, q);
        m(i, p) = c * vp - s * vq;
        m(i, q) = s * vp + c * vq;
    }
}

// One-sided Jacobi on a tall matrix (rows >= cols). Returns the factorization
// without the sign convention; ordering is descending with stable ties.
// Columns whose norm falls below the kernel's resolution (1e-12 of the input
// norm) are flushed to exact zeros: rotations against such columns are pure
// cancellation noise and would keep the sweep from converging.
SvdResult jacobi_svd_tall(const Matrix& a_in) {
    const std::size_t m = a_in.rows();
    const std::size_t n = a_in.cols();
    Matrix a = a_in;
    Matrix v = Matrix::identity(n);
    const double zero_tol = 1e-12 * a_in.frobenius_norm();
    const double zero_tol_sq = zero_tol * zero_tol;

    bool converged = (n <= 1);
    for (int sweep = 0; sweep < kJacobiSweepCap && !converged; ++sweep) {
        converged = true;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = column_dot(a, p, q);
                if (apq == 0.0) {
                    continue;
                }
                const double app = column_dot(a, p, p);
                const double aqq = column_dot(a, q, q);
                if (app <= zero_tol_sq || aqq <= zero_tol_sq) {
                    continue;
                }
                if (std::fabs(apq) <= kJacobiTol * std::sqrt(app * aqq)) {
                    continue;
                }
                converged = false;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                rotate_columns(a, p, q, c, s);
                rotate_columns(v, p, q, c, s);
            }
        }
    }
    if (!converged) {
        throw std::runtime_error("svd_deterministic: one-sided Jacobi did not converge within " +
                                 std::to_string(kJacobiSweepCap) + " sweeps");
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        sigma[j] = std::sqrt(column_dot(a, j, j));
        if (sigma[j] <= zero_tol) {
            sigma[j] = 0.0;
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

    SvdResult out;
    out.sigma.resize(n);
    out.u = Matrix(m, n);
    out.v = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        out.sigma[k] = sigma[src];
        for (std::size_t i = 0; i < n; ++i) {
            out.v(i, k) = v(i, src);
        }
        if (sigma[src] > 0.0) {
            for (std::size_t i = 0; i < m; ++i) {
                out.u(i, k) = a(i, src) / sigma[src];
            }
        }
        // exact-zero columns are completed below, against the others
    }

    // Fill columns belonging to exactly-zero singular values so that U keeps
    // orthonormal columns.
    bool has_zero = false;
    for (double s : out.sigma) {
        has_zero = has_zero || (s == 0.0);
    }
    if (has_zero) {
        std::size_t nonzero = 0;
        while (nonzero < n && out.sigma[nonzero] > 0.0) {
            ++nonzero;
        }
        Matrix head(m, nonzero);
        for (std::size_t k = 0; k < nonzero; ++k) {
            for (std::size_t i = 0; i < m; ++i) {
                head(i, k) = out.u(i, k);
            }
        }
        const Matrix full = complete_orthonormal_columns(head, n);
        for (std::size_t k = nonzero; k < n; ++k) {
            for (std::size_t i = 0; i < m; ++i) {
                out.u(i, k) = full(i, k);
            }
        }
    }
    return out;
}

void apply_sign_convention(SvdResult& r) {
    const std::size_t rank = r.sigma.size();
    for (std::size_t k = 0; k < rank; ++k) {
        std::size_t pivot = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < r.u.rows(); ++i) {
            const double mag = std::fabs(r.u(i, k));
            if (mag > best) {
                best = mag;
                pivot = i;
            }
        }
        if (r.u(pivot, k) < 0.0) {
            for (std::size_t i = 0; i < r.u.rows(); ++i) {
                r.u(i, k) = -r.u(i, k);
            }
            for (std::size_t i = 0; i < r.v.rows(); ++i) {
                r.v(i, k) = -r.v(i, k);
            }
        }
    }
}

}  // namespace

double Rng::gaussian() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            m(i, j) = scale * rng.gaussian();
        }
    }
    return m;
}

SvdResult svd_deterministic(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) {
        throw std::invalid_argument("svd_deterministic: empty matrix");
    }
    SvdResult r;
    if (m.rows() >= m.cols()) {
        r = jacobi_svd_tall(m);
    } else {
        SvdResult t = jacobi_svd_tall(m.transposed());
        r.u = std::move(t.v);
        r.sigma = std::move(t.sigma);
        r.v = std::move(t.u);
    }
    apply_sign_convention(r);
    return r;
}

bool simple_spectrum(const std::vector<double>& sigma, double rel_gap_tol) {
    if (sigma.empty() || sigma.front() == 0.0) {
        return false;
    }
    const double floor = rel_gap_tol * sigma.front();
    for (std::size_t k = 0; k + 1 < sigma.size(); ++k) {
        if (sigma[k] - sigma[k + 1] <= floor) {
            return false;
        }
    }
    return true;
}

Matrix truncate_rank(const Matrix& m, std::size_t rank) {
    const SvdResult r = svd_deterministic(m);
    const std::size_t keep = std::min(rank, r.sigma.size());
    Matrix out(m.rows(), m.cols());
    for (std::size_t k = 0; k < keep; ++k) {
        const double s = r.sigma[k];
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const double us = r.u(i, k) * s;
            for (std::size_t j = 0; j < m.cols(); ++j) {
                out(i, j) += us * r.v(j, k);
            }
        }
    }
    return out;
}

Matrix random_orthogonal(std::size_t dim, std::uint64_t seed) {
    if (dim < 1) {
        throw std::invalid_argument("random_orthogonal: dim must be >= 1");
    }
    Rng rng(seed);
    for (;;) {
        const Matrix a = gaussian_matrix(dim, dim, rng);
        Matrix q = orthonormalize(a, 1e-8);
        if (q.cols() == dim) {
            return q;
        }
        // near-singular draw (essentially never at these sizes): redraw
    }
}

Matrix random_invertible(std::size_t dim, std::uint64_t seed, double condition_cap) {
    if (condition_cap < 1.0) {
        throw std::invalid_argument("random_invertible: condition_cap must be >= 1");
    }
    Rng rng(seed);
    for (;;) {
        const Matrix a = gaussian_matrix(dim, dim, rng);
        const SvdResult r = svd_deterministic(a);
        if (r.sigma.front() == 0.0) {
            continue;
        }
        const double floor = r.sigma.front() / condition_cap;
        Matrix out(dim, dim);
        for (std::size_t k = 0; k < dim; ++k) {
            const double s = std::max(r.sigma[k], floor);
            for (std::size_t i = 0; i < dim; ++i) {
                const double us = r.u(i, k) * s;
                for (std::size_t j = 0; j < dim; ++j) {
                    out(i, j) += us * r.v(j, k);
                }
            }
        }
        return out;
    }
}

Matrix exp_antisymmetric(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("exp_antisymmetric: matrix must be square");
    }
    if (frobenius_distance(a, -1.0 * a.transposed()) > 1e-12) {
        throw std::invalid_argument("exp_antisymmetric: input is not antisymmetric");
    }
    const std::size_t n = a.rows();
    int squarings = 0;
    double norm = a.frobenius_norm();
    while (norm > 0.5) {
        norm *= 0.5;
        ++squarings;
    }
    const Matrix b = a * std::ldexp(1.0, -squarings);

    Matrix sum = Matrix::identity(n);
    Matrix term = Matrix::identity(n);
    for (int k = 1; k <= 40; ++k) {
        term = term * b * (1.0 / static_cast<double>(k));
        sum += term;
        if (term.frobenius_norm() < 1e-18) {
            break;
        }
    }
    for (int i = 0; i < squarings; ++i) {
        sum = sum * sum;
    }
    return sum;
}

Matrix orthonormalize(const Matrix& columns, double tol) {
    if (tol <= 0.0) {
        throw std::invalid_argument("orthonormalize: tol must be positive");
    }
    const std::size_t m = columns.rows();
    std::vector<std::vector<double>> basis;
    for (std::size_t j = 0; j < columns.cols(); ++j) {
        std::vector<double> v(m);
        double orig_sq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            v[i] = columns(i, j);
            orig_sq += v[i] * v[i];
        }
        const double orig = std::sqrt(orig_sq);
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : basis) {
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    dot += q[i] * v[i];
                }
                for (std::size_t i = 0; i < m; ++i) {
                    v[i] -= dot * q[i];
                }
            }
        }
        double res_sq = 0.0;
        for (double x : v) {
            res_sq += x * x;
        }
        const double res = std::sqrt(res_sq);
        if (res <= tol * orig) {
            continue;
        }
        for (double& x : v) {
            x /= res;
        }
        basis.push_back(std::move(v));
    }
    Matrix out(m, basis.size());
    for (std::size_t j = 0; j < basis.size(); ++j) {
        for (std::size_t i = 0; i < m; ++i) {
            out(i, j) = basis[j][i];
        }
    }
    return out;
}

double effective_rank(const Matrix& m) {
    if (m.frobenius_norm() == 0.0) {
        throw std::invalid_argument("effective_rank: zero matrix");
    }
    const SvdResult r = svd_deterministic(m);
    double total = 0.0;
    for (double s : r.sigma) {
        total += s;
    }
    double entropy = 0.0;
    for (double s : r.sigma) {
        if (s > 0.0) {
            const double p = s / total;
            entropy -= p * std::log(p);
        }
    }
    return std::exp(entropy);
}

Matrix inverse(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw std::invalid_argument("inverse: matrix must be square");
    }
    const std::size_t n = m.rows();
    Matrix a = m;
    Matrix inv = Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::fabs(a(col, col));
        for (std::size_t i = col + 1; i < n; ++i) {
            const double mag = std::fabs(a(i, col));
            if (mag > best) {
                best = mag;
                pivot = i;
            }
        }
        if (best < 1e-300) {
            throw std::runtime_error("inverse: singular matrix");
        }
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(pivot, j), a(col, j));
                std::swap(inv(pivot, j), inv(col, j));
            }
        }
        const double scale = 1.0 / a(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            a(col, j) *= scale;
            inv(col, j) *= scale;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == col) {
                continue;
            }
            const double factor = a(i, col);
            if (factor == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                a(i, j) -= factor * a(col, j);
                inv(i, j) -= factor * inv(col, j);
            }
        }
    }
    return inv;
}

double condition_number(const Matrix& m) {
    const SvdResult r = svd_deterministic(m);
    const double smin = r.sigma.back();
    if (smin == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return r.sigma.front() / smin;
}

std::vector<double> symmetric_eigenvalues(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw std::invalid_argument("symmetric_eigenvalues: matrix must be square");
    }
    const std::size_t n = m.rows();
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            a(i, j) = 0.5 * (m(i, j) + m(j, i));
        }
    }
    const double scale = std::max(a.frobenius_norm(), 1e-300);
    bool converged = (n <= 1);
    for (int sweep = 0; sweep < kJacobiSweepCap && !converged; ++sweep) {
        converged = true;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::fabs(apq) <= kJacobiTol * scale) {
                    continue;
                }
                converged = false;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const double app = a(p, p);
                const double aqq = a(q, q);
                a(p, p) = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                a(q, q) = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (i == p || i == q) {
                        continue;
                    }
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(p, i) = a(i, p);
                    a(i, q) = s * aip + c * aiq;
                    a(q, i) = a(i, q);
                }
            }
        }
    }
    if (!converged) {
        throw std::runtime_error("symmetric_eigenvalues: Jacobi did not converge within " +
                                 std::to_string(kJacobiSweepCap) + " sweeps");
    }
    std::vector<double> eigs(n);
    for (std::size_t i = 0; i < n; ++i) {
        eigs[i] = a(i, i);
    }
    std::sort(eigs.begin(), eigs.end(), std::greater<>());
    return eigs;
}

Matrix complete_orthonormal_columns(const Matrix& q, std::size_t target) {
    const std::size_t m = q.rows();
    if (target > m) {
        throw std::invalid_argument("complete_orthonormal_columns: target exceeds dimension");
    }
    std::vector<std::vector<double>> basis;
    for (std::size_t k = 0; k < q.cols(); ++k) {
        std::vector<double> col(m);
        for (std::size_t i = 0; i < m; ++i) {
            col[i] = q(i, k);
        }
        basis.push_back(std::move(col));
    }
    for (std::size_t cand = 0; cand < m && basis.size() < target; ++cand) {
        std::vector<double> v(m, 0.0);
        v[cand] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) {
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    dot += b[i] * v[i];
                }
                for (std::size_t i = 0; i < m; ++i) {
                    v[i] -= dot * b[i];
                }
            }
        }
        double norm_sq = 0.0;
        for (double x : v) {
            norm_sq += x * x;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm < 0.5) {
            continue;
        }
        for (double& x : v) {
            x /= norm;
        }
        basis.push_back(std::move(v));
    }
    if (basis.size() < target) {
        throw std::runtime_error("complete_orthonormal_columns: completion failed");
    }
    Matrix out(m, target);
    for (std::size_t k = 0; k < target; ++k) {
        for (std::size_t i = 0; i < m; ++i) {
            out(i, k) = basis[k][i];
        }
    }
    return out;
}

}  // namespace symred
