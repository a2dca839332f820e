#include "metaood/diff/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metaood/error.hpp"

namespace metaood::diff {

namespace {

std::string shape_str(Shape s) {
    return std::to_string(s.rows) + "x" + std::to_string(s.cols);
}

void require_same(const Matrix& a, const Matrix& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : shape_{rows, cols}, data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    shape_.rows = rows.size();
    shape_.cols = rows.size() == 0 ? 0 : rows.begin()->size();
    data_.reserve(shape_.size());
    for (const auto& r : rows) {
        if (r.size() != shape_.cols) throw DimensionError("ragged matrix initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::row(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

double Matrix::item() const {
    if (data_.size() != 1) throw DimensionError("item() on non-scalar " + shape_str(shape_));
    return data_[0];
}

Matrix Matrix::transpose() const {
    Matrix t(shape_.cols, shape_.rows);
    for (std::size_t r = 0; r < shape_.rows; ++r)
        for (std::size_t c = 0; c < shape_.cols; ++c) t(c, r) = (*this)(r, c);
    return t;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
    require_same(*this, other, "add");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    require_same(*this, other, "sub");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = &out(i, 0);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = &b(k, 0);
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn: row counts differ " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    Matrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* brow = &b(k, 0);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            double* orow = &out(i, 0);
            for (std::size_t j = 0; j < n; ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: column counts differ " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = &a(i, 0);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = &b(j, 0);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix cholesky_factor(const Matrix& s) {
    if (s.rows() != s.cols()) throw DimensionError("cholesky: matrix is not square");
    const std::size_t n = s.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = s(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (!(diag > 0.0)) throw NotPositiveDefiniteError(j, diag);
        const double ljj = std::sqrt(diag);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double acc = s(i, j);
            for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
            l(i, j) = acc / ljj;
        }
    }
    return l;
}

Matrix solve_lower(const Matrix& l, const Matrix& b) {
    const std::size_t n = l.rows();
    if (l.cols() != n || b.rows() != n) throw DimensionError("trisolve: shape mismatch");
    Matrix x = b;
    for (std::size_t i = 0; i < n; ++i) {
        const double lii = l(i, i);
        if (lii == 0.0) throw DomainError("trisolve: zero diagonal entry at " + std::to_string(i));
        for (std::size_t c = 0; c < b.cols(); ++c) {
            double acc = x(i, c);
            for (std::size_t k = 0; k < i; ++k) acc -= l(i, k) * x(k, c);
            x(i, c) = acc / lii;
        }
    }
    return x;
}

Matrix solve_lower_transposed(const Matrix& l, const Matrix& b) {
    const std::size_t n = l.rows();
    if (l.cols() != n || b.rows() != n) throw DimensionError("trisolve: shape mismatch");
    Matrix x = b;
    for (std::size_t ii = n; ii-- > 0;) {
        const double lii = l(ii, ii);
        if (lii == 0.0) throw DomainError("trisolve: zero diagonal entry at " + std::to_string(ii));
        for (std::size_t c = 0; c < b.cols(); ++c) {
            double acc = x(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) acc -= l(k, ii) * x(k, c);
            x(ii, c) = acc / lii;
        }
    }
    return x;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace metaood::diff
