#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gesm/csr.hpp"
#include "gesm/matrix.hpp"
#include "gesm/rng.hpp"
#include "gesm/tape.hpp"

namespace gesm {

/// Embedding distance in (0, 1): 1 - sigmoid(<z_i, z_j>). Symmetric; close to
/// 0 for strongly aligned rows, close to 1 for strongly opposed ones.
double dis(std::span<const double> z_i, std::span<const double> z_j);

/// Parallel index arrays: (center, positive) is an edge; negative is neither
/// the center nor one of its neighbors.
struct TripletBatch {
    std::vector<std::uint32_t> centers;
    std::vector<std::uint32_t> positives;
    std::vector<std::uint32_t> negatives;

    std::size_t size() const { return centers.size(); }
};

/// `count` triplets from a symmetrized adjacency (no self-loops): edges drawn
/// uniformly without replacement (with replacement once count exceeds the
/// edge count), the stored source as center, and a uniform rejection-sampled
/// negative outside N(center) and the center itself.
TripletBatch sample_triplets(const CsrMatrix& adjacency, Rng& rng, std::size_t count);

/// mean over triplets of beta*dis(center,positive) - (1-beta)*dis(center,negative);
/// pulls linked embeddings together, pushes non-neighbors apart.
double triplet_regularizer(const Matrix& z, const TripletBatch& batch, double beta);

/// Mean negative log-likelihood of the true class over masked nodes.
/// `output` holds per-row class probabilities; probabilities are clamped at
/// 1e-12 inside the log.
double masked_cross_entropy(const Matrix& output, const std::vector<std::uint32_t>& labels,
                            const std::vector<std::uint8_t>& mask);

/// Mean binary cross-entropy over every (node, class) pair of masked nodes;
/// `output` holds independent per-class probabilities.
double masked_binary_cross_entropy(const Matrix& output, const Matrix& label_matrix,
                                   const std::vector<std::uint8_t>& mask);

// ---- differentiable versions recorded onto a tape ----

Tensor cross_entropy_node(Tape& tape, Tensor output, const std::vector<std::uint32_t>& labels,
                          const std::vector<std::uint8_t>& mask);

Tensor binary_cross_entropy_node(Tape& tape, Tensor output, const Matrix& label_matrix,
                                 const std::vector<std::uint8_t>& mask);

Tensor triplet_node(Tape& tape, Tensor z, const TripletBatch& batch, double beta);

/// The three loss terms of one epoch and their weighted total.
struct LossReport {
    double j = 0.0;
    double r = 0.0;
    double l2 = 0.0;
    double total = 0.0;
};

LossReport make_loss_report(double j, double r, double l2, double lambda);

} // namespace gesm
