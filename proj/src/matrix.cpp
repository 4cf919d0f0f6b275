#include "gesm/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "gesm/error.hpp"

namespace gesm {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
    Matrix m;
    m.rows = rows_init.size();
    m.cols = m.rows ? rows_init.begin()->size() : 0;
    m.data.reserve(m.rows * m.cols);
    for (const auto& r : rows_init) {
        if (r.size() != m.cols) throw DimensionError("Matrix::from_rows: ragged rows");
        m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
}

Matrix Matrix::filled(std::size_t r, std::size_t c, double v) {
    Matrix m(r, c);
    std::fill(m.data.begin(), m.data.end(), v);
    return m;
}

namespace {

void require_mm(std::size_t ak, std::size_t bk, const char* who) {
    if (ak != bk) throw DimensionError(std::string(who) + ": inner dimensions differ");
}

} // namespace

void matmul_nn_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    require_mm(a.cols, b.rows, "matmul");
    if (out.rows != a.rows || out.cols != b.cols)
        throw DimensionError("matmul: output shape mismatch");
    const std::size_t n = a.rows, k = a.cols, m = b.cols;
#pragma omp parallel for schedule(static) if (n > 63)
    for (std::size_t i = 0; i < n; ++i) {
        double* out_row = out.row(i);
        const double* a_row = a.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a_row[p];
            if (av == 0.0) continue;
            const double* b_row = b.row(p);
            for (std::size_t j = 0; j < m; ++j) out_row[j] += av * b_row[j];
        }
    }
}

void matmul_into(const Matrix& a, const Matrix& b, Matrix& out) {
    require_mm(a.cols, b.rows, "matmul");
    out.rows = a.rows;
    out.cols = b.cols;
    out.data.assign(a.rows * b.cols, 0.0);
    matmul_nn_acc(a, b, out);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix out;
    matmul_into(a, b, out);
    return out;
}

void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    require_mm(a.cols, b.cols, "matmul_nt");
    if (out.rows != a.rows || out.cols != b.rows)
        throw DimensionError("matmul_nt: output shape mismatch");
    const std::size_t n = a.rows, k = a.cols, m = b.rows;
#pragma omp parallel for schedule(static) if (n > 63)
    for (std::size_t i = 0; i < n; ++i) {
        double* out_row = out.row(i);
        const double* a_row = a.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            const double* b_row = b.row(j);
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
            out_row[j] += acc;
        }
    }
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    require_mm(a.rows, b.rows, "matmul_tn");
    if (out.rows != a.cols || out.cols != b.cols)
        throw DimensionError("matmul_tn: output shape mismatch");
    const std::size_t k = a.rows, n = a.cols, m = b.cols;
#pragma omp parallel for schedule(static) if (n > 63)
    for (std::size_t i = 0; i < n; ++i) {
        double* out_row = out.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a.at(p, i);
            if (av == 0.0) continue;
            const double* b_row = b.row(p);
            for (std::size_t j = 0; j < m; ++j) out_row[j] += av * b_row[j];
        }
    }
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
    return t;
}

void add_into(Matrix& dst, const Matrix& src) {
    if (!dst.same_shape(src)) throw DimensionError("add_into: shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

void axpy_into(Matrix& dst, double c, const Matrix& src) {
    if (!dst.same_shape(src)) throw DimensionError("axpy_into: shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += c * src.data[i];
}

Matrix slice_cols(const Matrix& src, std::size_t col_begin, std::size_t col_end) {
    if (col_begin > col_end || col_end > src.cols)
        throw DimensionError("slice_cols: range out of bounds");
    Matrix out(src.rows, col_end - col_begin);
    for (std::size_t i = 0; i < src.rows; ++i) {
        const double* s = src.row(i) + col_begin;
        std::copy(s, s + out.cols, out.row(i));
    }
    return out;
}

void acc_col_slice(Matrix& dst, const Matrix& src, std::size_t col_begin) {
    if (dst.rows != src.rows || col_begin + dst.cols > src.cols)
        throw DimensionError("acc_col_slice: range out of bounds");
    for (std::size_t i = 0; i < dst.rows; ++i) {
        const double* s = src.row(i) + col_begin;
        double* d = dst.row(i);
        for (std::size_t j = 0; j < dst.cols; ++j) d[j] += s[j];
    }
}

bool all_finite(const Matrix& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw DimensionError("max_abs_diff: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::fabs(a.data[i] - b.data[i]));
    return worst;
}

} // namespace gesm
