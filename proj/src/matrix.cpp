#include "symred/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace symred {

namespace {

void require_finite(const std::vector<double>& entries) {
    for (double v : entries) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("Matrix: non-finite entry");
        }
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (entries_.size() != rows_ * cols_) {
        throw std::invalid_argument("Matrix: entry count does not match shape");
    }
    require_finite(entries_);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    entries_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
        if (row.size() != cols_) {
            throw std::invalid_argument("Matrix: ragged initializer");
        }
        entries_.insert(entries_.end(), row.begin(), row.end());
    }
    require_finite(entries_);
}

Matrix Matrix::identity(std::size_t dim) {
    Matrix m(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            t(j, i) = (*this)(i, j);
        }
    }
    return t;
}

Matrix Matrix::column(std::size_t j) const {
    if (j >= cols_) {
        throw std::out_of_range("Matrix::column: index out of range");
    }
    Matrix c(rows_, 1);
    for (std::size_t i = 0; i < rows_; ++i) {
        c(i, 0) = (*this)(i, j);
    }
    return c;
}

double Matrix::frobenius_norm() const {
    double sum = 0.0;
    for (double v : entries_) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

double Matrix::max_abs() const {
    double mx = 0.0;
    for (double v : entries_) {
        mx = std::max(mx, std::fabs(v));
    }
    return mx;
}

double Matrix::trace() const {
    double sum = 0.0;
    const std::size_t k = std::min(rows_, cols_);
    for (std::size_t i = 0; i < k; ++i) {
        sum += (*this)(i, i);
    }
    return sum;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    if (!same_shape(other)) {
        throw std::invalid_argument("Matrix::operator+=: shape mismatch");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        entries_[i] += other.entries_[i];
    }
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    if (!same_shape(other)) {
        throw std::invalid_argument("Matrix::operator-=: shape mismatch");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        entries_[i] -= other.entries_[i];
    }
    return *this;
}

Matrix& Matrix::operator*=(double scalar) {
    for (double& v : entries_) {
        v *= scalar;
    }
    return *this;
}

Matrix operator+(Matrix lhs, const Matrix& rhs) {
    lhs += rhs;
    return lhs;
}

Matrix operator-(Matrix lhs, const Matrix& rhs) {
    lhs -= rhs;
    return lhs;
}

Matrix operator*(const Matrix& lhs, const Matrix& rhs) {
    if (lhs.cols() != rhs.rows()) {
        throw std::invalid_argument("Matrix::operator*: inner dimension mismatch");
    }
    Matrix out(lhs.rows(), rhs.cols());
    for (std::size_t i = 0; i < lhs.rows(); ++i) {
        for (std::size_t k = 0; k < lhs.cols(); ++k) {
            const double a = lhs(i, k);
            for (std::size_t j = 0; j < rhs.cols(); ++j) {
                out(i, j) += a * rhs(k, j);
            }
        }
    }
    return out;
}

Matrix operator*(double scalar, Matrix m) {
    m *= scalar;
    return m;
}

Matrix operator*(Matrix m, double scalar) {
    m *= scalar;
    return m;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("frobenius_distance: shape mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.entries().size(); ++i) {
        const double d = a.entries()[i] - b.entries()[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

}  // namespace symred
