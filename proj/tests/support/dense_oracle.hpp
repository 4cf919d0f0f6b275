#pragma once

#include "gesm/matrix.hpp"
#include "gesm/model.hpp"

namespace gesm::testing {

/// Straight-line dense re-derivation of the network, written with naive loops
/// and no shared kernels, for cross-checking the sparse implementation on
/// small graphs. `adj01` is the raw 0/1 adjacency without self-loops.
struct OracleOut {
    Matrix output;
    Matrix reg_embedding;
};

Matrix oracle_mm(const Matrix& a, const Matrix& b);
Matrix oracle_elu(Matrix m);
Matrix oracle_row_softmax(Matrix m);

/// Column-normalized self-looped transition as a dense matrix.
Matrix oracle_a_hat(const Matrix& adj01);

OracleOut oracle_forward(const Matrix& x, const Matrix& adj01, const GesmParams& params,
                         bool multi_label, bool outer_sum_pooling = false);

} // namespace gesm::testing
