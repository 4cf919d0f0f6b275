#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace gesm {

/// Dense row-major matrix of 64-bit reals. Vectors are 1×n or n×1 matrices.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    static Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, c); }
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows_init);
    static Matrix filled(std::size_t r, std::size_t c, double v);

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
    std::span<const double> row_span(std::size_t i) const { return {row(i), cols}; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool is_scalar() const { return rows == 1 && cols == 1; }

    bool operator==(const Matrix& o) const = default;
};

/// out = a·b. Accumulation over k runs in ascending order for every output
/// entry, so results are identical regardless of thread count.
void matmul_into(const Matrix& a, const Matrix& b, Matrix& out);
Matrix matmul(const Matrix& a, const Matrix& b);

/// out += a·b
void matmul_nn_acc(const Matrix& a, const Matrix& b, Matrix& out);
/// out += a·bᵀ   (a: n×k, b: m×k, out: n×m)
void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& out);
/// out += aᵀ·b   (a: k×n, b: k×m, out: n×m)
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out);

Matrix transpose(const Matrix& m);

/// dst += src
void add_into(Matrix& dst, const Matrix& src);
/// dst += c·src
void axpy_into(Matrix& dst, double c, const Matrix& src);

/// Columns [col_begin, col_begin + out.cols) of src copied into out.
Matrix slice_cols(const Matrix& src, std::size_t col_begin, std::size_t col_end);
/// dst += the block of src starting at column col_begin (dst.cols wide).
void acc_col_slice(Matrix& dst, const Matrix& src, std::size_t col_begin);

bool all_finite(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

} // namespace gesm
