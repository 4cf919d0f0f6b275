#include "gesm/csr.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gesm/error.hpp"

namespace gesm {

CsrMatrix csr_from_edges(std::size_t n_rows, std::size_t n_cols,
                         std::span<const Edge> edges, double value) {
    std::vector<Edge> sorted(edges.begin(), edges.end());
    for (const auto& [r, c] : sorted) {
        if (r >= n_rows || c >= n_cols)
            throw ValueError("csr_from_edges: entry (" + std::to_string(r) + "," +
                             std::to_string(c) + ") outside " + std::to_string(n_rows) + "x" +
                             std::to_string(n_cols));
    }
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    CsrMatrix m;
    m.n_rows = n_rows;
    m.n_cols = n_cols;
    m.row_offsets.assign(n_rows + 1, 0);
    m.col_indices.reserve(sorted.size());
    m.values.assign(sorted.size(), value);
    for (const auto& [r, c] : sorted) m.row_offsets[r + 1]++;
    for (std::size_t i = 0; i < n_rows; ++i) m.row_offsets[i + 1] += m.row_offsets[i];
    for (const auto& [r, c] : sorted) m.col_indices.push_back(c);
    return m;
}

void validate_csr(const CsrMatrix& m) {
    if (m.row_offsets.size() != m.n_rows + 1)
        throw DimensionError("csr: row_offsets length must be n_rows + 1");
    if (m.row_offsets.front() != 0)
        throw ValueError("csr: row_offsets[0] must be 0");
    if (m.row_offsets.back() != m.col_indices.size())
        throw ValueError("csr: row_offsets[n_rows] must equal nnz");
    if (m.values.size() != m.col_indices.size())
        throw DimensionError("csr: values and col_indices lengths differ");
    for (std::size_t i = 0; i < m.n_rows; ++i) {
        if (m.row_offsets[i] > m.row_offsets[i + 1])
            throw ValueError("csr: row_offsets must be nondecreasing");
        for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) {
            if (m.col_indices[k] >= m.n_cols)
                throw ValueError("csr: column index out of range");
            if (k > m.row_offsets[i] && m.col_indices[k] <= m.col_indices[k - 1])
                throw ValueError("csr: column indices must be strictly increasing per row");
        }
    }
}

CsrMatrix add_self_loops(const CsrMatrix& adj) {
    if (adj.n_rows != adj.n_cols)
        throw DimensionError("add_self_loops: adjacency must be square");
    CsrMatrix out;
    out.n_rows = adj.n_rows;
    out.n_cols = adj.n_cols;
    out.row_offsets.assign(adj.n_rows + 1, 0);
    out.col_indices.reserve(adj.nnz() + adj.n_rows);
    out.values.reserve(adj.nnz() + adj.n_rows);
    for (std::size_t i = 0; i < adj.n_rows; ++i) {
        auto cols = adj.row_cols(i);
        bool placed = false;
        for (std::uint32_t c : cols) {
            if (!placed && c >= i) {
                if (c > i) out.col_indices.push_back(static_cast<std::uint32_t>(i));
                placed = true; // diagonal emitted (either inserted or already present as c == i)
            }
            out.col_indices.push_back(c);
        }
        if (!placed) out.col_indices.push_back(static_cast<std::uint32_t>(i));
        out.row_offsets[i + 1] = out.col_indices.size();
    }
    out.values.assign(out.col_indices.size(), 1.0);
    return out;
}

CsrMatrix column_normalize(const CsrMatrix& adj_tilde) {
    std::vector<std::size_t> degree(adj_tilde.n_cols, 0);
    for (std::uint32_t c : adj_tilde.col_indices) degree[c]++;
    for (std::size_t c = 0; c < adj_tilde.n_cols; ++c) {
        if (degree[c] == 0)
            throw NormalizationError("column_normalize: column " + std::to_string(c) +
                                     " has no entries");
    }
    CsrMatrix out = adj_tilde;
    for (std::size_t k = 0; k < out.nnz(); ++k)
        out.values[k] = 1.0 / static_cast<double>(degree[out.col_indices[k]]);
    return out;
}

CsrMatrix transpose(const CsrMatrix& m, std::vector<std::uint32_t>* source_index) {
    CsrMatrix t;
    t.n_rows = m.n_cols;
    t.n_cols = m.n_rows;
    t.row_offsets.assign(t.n_rows + 1, 0);
    for (std::uint32_t c : m.col_indices) t.row_offsets[c + 1]++;
    for (std::size_t i = 0; i < t.n_rows; ++i) t.row_offsets[i + 1] += t.row_offsets[i];

    t.col_indices.resize(m.nnz());
    t.values.resize(m.nnz());
    if (source_index) source_index->resize(m.nnz());
    std::vector<std::size_t> cursor(t.row_offsets.begin(), t.row_offsets.end() - 1);
    for (std::size_t r = 0; r < m.n_rows; ++r) {
        for (std::size_t k = m.row_offsets[r]; k < m.row_offsets[r + 1]; ++k) {
            const std::uint32_t c = m.col_indices[k];
            const std::size_t pos = cursor[c]++;
            t.col_indices[pos] = static_cast<std::uint32_t>(r);
            t.values[pos] = m.values[k];
            if (source_index) (*source_index)[pos] = static_cast<std::uint32_t>(k);
        }
    }
    return t;
}

WalkDistribution walk_step(const CsrMatrix& p, const WalkDistribution& u) {
    if (p.n_rows != p.n_cols)
        throw DimensionError("walk_step: transition matrix must be square");
    if (u.values.size() != p.n_cols)
        throw DimensionError("walk_step: distribution length differs from node count");
    WalkDistribution next;
    next.values.assign(p.n_rows, 0.0);
    next.step = u.step + 1;
    for (std::size_t i = 0; i < p.n_rows; ++i) {
        double acc = 0.0;
        for (std::size_t k = p.row_offsets[i]; k < p.row_offsets[i + 1]; ++k)
            acc += p.values[k] * u.values[p.col_indices[k]];
        next.values[i] = acc;
    }
    return next;
}

CsrMatrix transition_matrix(const CsrMatrix& adj, TransitionKind kind) {
    if (kind == TransitionKind::SelfLooped) return column_normalize(add_self_loops(adj));
    return column_normalize(adj);
}

void spmm_acc(const CsrMatrix& s, const Matrix& m, Matrix& out) {
    if (s.n_cols != m.rows) throw DimensionError("spmm: S.n_cols must equal M.rows");
    if (out.rows != s.n_rows || out.cols != m.cols)
        throw DimensionError("spmm: output shape mismatch");
    const std::size_t w = m.cols;
#pragma omp parallel for schedule(static) if (s.n_rows > 255)
    for (std::size_t i = 0; i < s.n_rows; ++i) {
        double* out_row = out.row(i);
        for (std::size_t k = s.row_offsets[i]; k < s.row_offsets[i + 1]; ++k) {
            const double v = s.values[k];
            const double* m_row = m.row(s.col_indices[k]);
            for (std::size_t j = 0; j < w; ++j) out_row[j] += v * m_row[j];
        }
    }
}

void spmm_into(const CsrMatrix& s, const Matrix& m, Matrix& out) {
    if (s.n_cols != m.rows) throw DimensionError("spmm: S.n_cols must equal M.rows");
    out.rows = s.n_rows;
    out.cols = m.cols;
    out.data.assign(s.n_rows * m.cols, 0.0);
    spmm_acc(s, m, out);
}

Matrix spmm(const CsrMatrix& s, const Matrix& m) {
    Matrix out;
    spmm_into(s, m, out);
    return out;
}

Matrix to_dense(const CsrMatrix& m) {
    Matrix d(m.n_rows, m.n_cols);
    for (std::size_t i = 0; i < m.n_rows; ++i)
        for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k)
            d.at(i, m.col_indices[k]) = m.values[k];
    return d;
}

} // namespace gesm
