#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gesm/matrix.hpp"

namespace gesm {

/// Compressed sparse row matrix in canonical form: offsets nondecreasing,
/// column indices strictly increasing within each row, no duplicates.
struct CsrMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_offsets; // n_rows + 1 entries
    std::vector<std::uint32_t> col_indices;
    std::vector<double> values; // aligned with col_indices

    std::size_t nnz() const { return col_indices.size(); }

    std::span<const std::uint32_t> row_cols(std::size_t i) const {
        return {col_indices.data() + row_offsets[i], row_offsets[i + 1] - row_offsets[i]};
    }
    std::span<const double> row_vals(std::size_t i) const {
        return {values.data() + row_offsets[i], row_offsets[i + 1] - row_offsets[i]};
    }

    bool operator==(const CsrMatrix& o) const = default;
};

using Edge = std::pair<std::uint32_t, std::uint32_t>;

/// Canonical CSR from a coordinate list; duplicates collapse to one entry.
/// Every entry gets `value` (graph adjacencies are 0/1-valued here).
CsrMatrix csr_from_edges(std::size_t n_rows, std::size_t n_cols,
                         std::span<const Edge> edges, double value = 1.0);

/// Throws unless the structural invariants above hold.
void validate_csr(const CsrMatrix& m);

/// Ã = A + I. Existing diagonal entries keep value 1; the input must be square.
CsrMatrix add_self_loops(const CsrMatrix& adj);

/// Â = Ã·D⁻¹ where D is the diagonal of integer column degrees. Every column
/// of the result sums to one; a column with no entries is an error.
CsrMatrix column_normalize(const CsrMatrix& adj_tilde);

/// Transpose in canonical form. When `source_index` is given it receives, for
/// each entry of the transpose, the index of the originating entry in `m`
/// (used to reuse one value buffer for both orientations of a pattern).
CsrMatrix transpose(const CsrMatrix& m, std::vector<std::uint32_t>* source_index = nullptr);

/// Probability mass per node after `step` applications of a transition matrix.
struct WalkDistribution {
    std::vector<double> values;
    std::size_t step = 0;
};

/// One step of the walk: u ← P·u, step count incremented. P must be n×n with
/// len(u) = n; mass is conserved when P is column-stochastic.
WalkDistribution walk_step(const CsrMatrix& p, const WalkDistribution& u);

/// Which adjacency the transition matrix is normalized from.
enum class TransitionKind {
    SelfLooped, // column-normalize A + I (the model path)
    Plain,      // column-normalize A as given
};

CsrMatrix transition_matrix(const CsrMatrix& adj, TransitionKind kind = TransitionKind::SelfLooped);

/// out = S·M. Each output row accumulates in ascending column-index order,
/// so results are bit-identical regardless of thread count.
void spmm_into(const CsrMatrix& s, const Matrix& m, Matrix& out);
Matrix spmm(const CsrMatrix& s, const Matrix& m);
/// out += S·M
void spmm_acc(const CsrMatrix& s, const Matrix& m, Matrix& out);

Matrix to_dense(const CsrMatrix& m);

} // namespace gesm
