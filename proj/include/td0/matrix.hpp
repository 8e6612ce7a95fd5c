#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "td0/errors.hpp"

namespace td0 {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Sized for the small systems this
/// library works with (d up to a few hundred); no view machinery.
/// Entries are checked finite whenever a matrix is built from user data.
class Matrix {
  public:
    Matrix() = default;

    /// rows x cols zero matrix.
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    /// Build from explicit entries, row major. Throws on non-finite input.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (data_.size() != rows_ * cols_)
            throw DimensionError("matrix: entry count does not match shape");
        require_finite();
    }

    /// Build from nested braces: Matrix{{1,2},{3,4}}.
    Matrix(std::initializer_list<std::initializer_list<double>> nested) {
        rows_ = nested.size();
        cols_ = rows_ ? nested.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& row : nested) {
            if (row.size() != cols_)
                throw DimensionError("matrix: ragged initializer");
            for (double v : row) data_.push_back(v);
        }
        require_finite();
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }

    /// Largest absolute entry.
    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Maximum absolute row sum (operator inf-norm).
    double inf_norm() const {
        double m = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) s += std::abs((*this)(i, j));
            m = std::max(m, s);
        }
        return m;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return std::sqrt(s);
    }

    Vec row(std::size_t i) const {
        return Vec(data_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
                   data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_));
    }

  private:
    void require_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) throw DomainError("matrix: non-finite entry");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Vec operator*(const Matrix& a, const Vec& x);
Matrix transpose(const Matrix& a);

// Vector helpers.
double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
Vec operator+(const Vec& a, const Vec& b);
Vec operator-(const Vec& a, const Vec& b);
Vec operator*(double s, const Vec& a);

} // namespace td0
