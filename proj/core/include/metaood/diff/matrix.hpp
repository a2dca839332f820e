#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace metaood::diff {

struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const noexcept { return rows * cols; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense row-major matrix of doubles. Scalars are 1x1, row vectors 1xn.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix scalar(double v) { return Matrix(1, 1, v); }
    static Matrix row(std::span<const double> values);
    static Matrix column(std::span<const double> values);

    std::size_t rows() const noexcept { return shape_.rows; }
    std::size_t cols() const noexcept { return shape_.cols; }
    std::size_t size() const noexcept { return data_.size(); }
    Shape shape() const noexcept { return shape_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
    const double& operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<const double> row_span(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * shape_.cols, shape_.cols);
    }
    std::vector<double>& storage() noexcept { return data_; }

    double item() const;
    Matrix transpose() const;
    bool all_finite() const noexcept;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

/// Plain (non-differentiable) product; used by backward rules and oracles.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // aᵀ·b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a·bᵀ

// Dense kernels shared by the differentiable ops and their backward rules.
// Factorization throws NotPositiveDefiniteError; solves expect a nonsingular factor.
Matrix cholesky_factor(const Matrix& s);
Matrix solve_lower(const Matrix& l, const Matrix& b);        // L·X = B
Matrix solve_lower_transposed(const Matrix& l, const Matrix& b);  // Lᵀ·X = B

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace metaood::diff
