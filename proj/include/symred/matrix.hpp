#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace symred {

/// Dense row-major matrix of 64-bit reals. Constructors reject non-finite
/// entries; zero-width shapes (m x 0) are allowed so empty bases can be
/// represented.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t dim);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

    const std::vector<double>& entries() const noexcept { return entries_; }

    Matrix transposed() const;
    Matrix column(std::size_t j) const;

    double frobenius_norm() const;
    double max_abs() const;
    double trace() const;

    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double scalar);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> entries_;
};

Matrix operator+(Matrix lhs, const Matrix& rhs);
Matrix operator-(Matrix lhs, const Matrix& rhs);
Matrix operator*(const Matrix& lhs, const Matrix& rhs);
Matrix operator*(double scalar, Matrix m);
Matrix operator*(Matrix m, double scalar);

/// Frobenius norm of (a - b); shapes must agree.
double frobenius_distance(const Matrix& a, const Matrix& b);

}  // namespace symred
