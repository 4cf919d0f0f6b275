#include "gesm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "gesm/error.hpp"

namespace gesm {

namespace {

constexpr double kProbFloor = 1e-12;

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += a[k] * b[k];
    }
    return s;
}

void check_batch(const TripletBatch& batch, std::size_t n_rows, double beta) {
    if (batch.size() == 0) {
        throw ValueError("triplet batch is empty");
    }
    if (batch.positives.size() != batch.size() || batch.negatives.size() != batch.size()) {
        throw SizeError("triplet arrays have mismatched lengths");
    }
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw ValueError("triplet weight must lie in [0, 1], got " + std::to_string(beta));
    }
    for (std::size_t t = 0; t < batch.size(); ++t) {
        if (batch.centers[t] >= n_rows || batch.positives[t] >= n_rows ||
            batch.negatives[t] >= n_rows) {
            throw ValueError("triplet " + std::to_string(t) + " indexes past the embedding rows");
        }
    }
}

std::size_t checked_mask_size(const std::vector<std::uint8_t>& mask, std::size_t rows) {
    if (mask.size() != rows) {
        throw SizeError("mask has " + std::to_string(mask.size()) + " entries for " +
                        std::to_string(rows) + " rows");
    }
    std::size_t m = 0;
    for (std::uint8_t v : mask) {
        m += v != 0;
    }
    if (m == 0) {
        throw ValueError("mask selects no nodes");
    }
    return m;
}

} // namespace

double dis(std::span<const double> z_i, std::span<const double> z_j) {
    if (z_i.size() != z_j.size()) {
        throw DimensionError("dis: vectors have lengths " + std::to_string(z_i.size()) +
                             " and " + std::to_string(z_j.size()));
    }
    // 1 - sigmoid(s) computed as sigmoid(-s): stays positive out to s ~ 745
    // instead of rounding to 0 near s ~ 37.
    return stable_sigmoid(-dot(z_i, z_j));
}

TripletBatch sample_triplets(const CsrMatrix& adjacency, Rng& rng, std::size_t count) {
    const std::size_t n = adjacency.n_rows;
    if (adjacency.n_cols != n) {
        throw DimensionError("sample_triplets: adjacency must be square");
    }
    const std::size_t e = adjacency.nnz();
    if (e == 0 || n < 3) {
        throw ValueError("sample_triplets: need at least one edge and three nodes");
    }
    if (count == 0) {
        throw ValueError("sample_triplets: count must be positive");
    }
    // A center is usable only if some node lies outside N(center) + itself.
    bool any_usable = false;
    for (std::size_t u = 0; u < n && !any_usable; ++u) {
        const std::size_t deg = adjacency.row_offsets[u + 1] - adjacency.row_offsets[u];
        any_usable = deg >= 1 && deg + 1 < n;
    }
    if (!any_usable) {
        throw ValueError("sample_triplets: every linked node neighbors all others; "
                         "no valid negative exists");
    }

    std::vector<std::size_t> picks;
    picks.reserve(count);
    if (count <= e) {
        for (std::uint32_t k : rng.sample_without_replacement(static_cast<std::uint32_t>(e),
                                                              static_cast<std::uint32_t>(count))) {
            picks.push_back(k);
        }
    } else {
        for (std::size_t k = 0; k < count; ++k) {
            picks.push_back(rng.uniform_index(e));
        }
    }

    TripletBatch batch;
    batch.centers.reserve(count);
    batch.positives.reserve(count);
    batch.negatives.reserve(count);
    for (std::size_t entry : picks) {
        std::size_t u;
        for (;;) {
            u = static_cast<std::size_t>(
                    std::upper_bound(adjacency.row_offsets.begin(), adjacency.row_offsets.end(),
                                     entry) -
                    adjacency.row_offsets.begin()) -
                1;
            const std::size_t deg = adjacency.row_offsets[u + 1] - adjacency.row_offsets[u];
            if (deg + 1 < n) {
                break;
            }
            entry = rng.uniform_index(e); // center saturates the graph; redraw the edge
        }
        const std::uint32_t v = adjacency.col_indices[entry];
        const auto neighbors = adjacency.row_cols(static_cast<std::uint32_t>(u));
        std::uint32_t w;
        do {
            w = static_cast<std::uint32_t>(rng.uniform_index(n));
        } while (w == u || std::binary_search(neighbors.begin(), neighbors.end(), w));
        batch.centers.push_back(static_cast<std::uint32_t>(u));
        batch.positives.push_back(v);
        batch.negatives.push_back(w);
    }
    return batch;
}

double triplet_regularizer(const Matrix& z, const TripletBatch& batch, double beta) {
    check_batch(batch, z.rows, beta);
    double sum = 0.0;
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const auto zc = z.row_span(batch.centers[t]);
        sum += beta * dis(zc, z.row_span(batch.positives[t]));
        sum -= (1.0 - beta) * dis(zc, z.row_span(batch.negatives[t]));
    }
    return sum / static_cast<double>(batch.size());
}

double masked_cross_entropy(const Matrix& output, const std::vector<std::uint32_t>& labels,
                            const std::vector<std::uint8_t>& mask) {
    if (labels.size() != output.rows) {
        throw SizeError("have " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(output.rows) + " output rows");
    }
    const std::size_t m = checked_mask_size(mask, output.rows);
    double sum = 0.0;
    for (std::size_t i = 0; i < output.rows; ++i) {
        if (!mask[i]) {
            continue;
        }
        if (labels[i] >= output.cols) {
            throw ValueError("node " + std::to_string(i) + " has label " +
                             std::to_string(labels[i]) + " outside " +
                             std::to_string(output.cols) + " classes");
        }
        sum -= std::log(std::max(output.at(i, labels[i]), kProbFloor));
    }
    return sum / static_cast<double>(m);
}

double masked_binary_cross_entropy(const Matrix& output, const Matrix& label_matrix,
                                   const std::vector<std::uint8_t>& mask) {
    if (!output.same_shape(label_matrix)) {
        throw DimensionError("output and label matrix shapes differ");
    }
    const std::size_t m = checked_mask_size(mask, output.rows);
    double sum = 0.0;
    for (std::size_t i = 0; i < output.rows; ++i) {
        if (!mask[i]) {
            continue;
        }
        for (std::size_t k = 0; k < output.cols; ++k) {
            const double p = output.at(i, k);
            const double y = label_matrix.at(i, k);
            sum -= y * std::log(std::max(p, kProbFloor));
            sum -= (1.0 - y) * std::log(std::max(1.0 - p, kProbFloor));
        }
    }
    return sum / static_cast<double>(m * output.cols);
}

Tensor cross_entropy_node(Tape& tape, Tensor output, const std::vector<std::uint32_t>& labels,
                          const std::vector<std::uint8_t>& mask) {
    const Matrix& probs = tape.value(output);
    const double j = masked_cross_entropy(probs, labels, mask);
    std::size_t m = 0;
    for (std::uint8_t v : mask) {
        m += v != 0;
    }
    auto shared_labels = std::make_shared<std::vector<std::uint32_t>>(labels);
    auto shared_mask = std::make_shared<std::vector<std::uint8_t>>(mask);
    const TensorId ip = output.id;
    const Tensor parents[] = {output};
    return tape.make_node(
        Matrix::filled(1, 1, j), parents,
        [ip, shared_labels, shared_mask, m](Tape& t, const Matrix& g) {
            const Tensor probs_t{ip, &t};
            if (!t.wants_grad(probs_t)) {
                return;
            }
            const Matrix& p = t.value(probs_t);
            Matrix& dp = t.grad_buffer(probs_t);
            const double scale = g.at(0, 0) / static_cast<double>(m);
            for (std::size_t i = 0; i < p.rows; ++i) {
                if (!(*shared_mask)[i]) {
                    continue;
                }
                const std::uint32_t y = (*shared_labels)[i];
                const double pv = p.at(i, y);
                if (pv > kProbFloor) {
                    dp.at(i, y) -= scale / pv;
                }
            }
        });
}

Tensor binary_cross_entropy_node(Tape& tape, Tensor output, const Matrix& label_matrix,
                                 const std::vector<std::uint8_t>& mask) {
    const Matrix& probs = tape.value(output);
    const double j = masked_binary_cross_entropy(probs, label_matrix, mask);
    std::size_t m = 0;
    for (std::uint8_t v : mask) {
        m += v != 0;
    }
    auto shared_labels = std::make_shared<Matrix>(label_matrix);
    auto shared_mask = std::make_shared<std::vector<std::uint8_t>>(mask);
    const TensorId ip = output.id;
    const Tensor parents[] = {output};
    return tape.make_node(
        Matrix::filled(1, 1, j), parents,
        [ip, shared_labels, shared_mask, m](Tape& t, const Matrix& g) {
            const Tensor probs_t{ip, &t};
            if (!t.wants_grad(probs_t)) {
                return;
            }
            const Matrix& p = t.value(probs_t);
            Matrix& dp = t.grad_buffer(probs_t);
            const double scale = g.at(0, 0) / static_cast<double>(m * p.cols);
            for (std::size_t i = 0; i < p.rows; ++i) {
                if (!(*shared_mask)[i]) {
                    continue;
                }
                for (std::size_t k = 0; k < p.cols; ++k) {
                    const double pv = p.at(i, k);
                    const double y = shared_labels->at(i, k);
                    double d = 0.0;
                    if (pv > kProbFloor) {
                        d -= y / pv;
                    }
                    if (1.0 - pv > kProbFloor) {
                        d += (1.0 - y) / (1.0 - pv);
                    }
                    dp.at(i, k) += scale * d;
                }
            }
        });
}

Tensor triplet_node(Tape& tape, Tensor z, const TripletBatch& batch, double beta) {
    const Matrix& zv = tape.value(z);
    const double r = triplet_regularizer(zv, batch, beta);
    auto shared = std::make_shared<TripletBatch>(batch);
    const TensorId iz = z.id;
    const Tensor parents[] = {z};
    return tape.make_node(
        Matrix::filled(1, 1, r), parents, [iz, shared, beta](Tape& t, const Matrix& g) {
            const Tensor zt{iz, &t};
            if (!t.wants_grad(zt)) {
                return;
            }
            const Matrix& zm = t.value(zt);
            Matrix& dz = t.grad_buffer(zt);
            const double inv = g.at(0, 0) / static_cast<double>(shared->size());
            const std::size_t d = zm.cols;
            for (std::size_t tix = 0; tix < shared->size(); ++tix) {
                const std::uint32_t c = shared->centers[tix];
                const double* zc = zm.row(c);
                // d/ds [w * (1 - sigmoid(s))] = -w * sigmoid'(s)
                const auto accumulate = [&](std::uint32_t other, double w) {
                    const double* zo = zm.row(other);
                    double s = 0.0;
                    for (std::size_t k = 0; k < d; ++k) {
                        s += zc[k] * zo[k];
                    }
                    const double sig = stable_sigmoid(s);
                    const double ds = -w * sig * (1.0 - sig) * inv;
                    double* dc = dz.row(c);
                    double* dn = dz.row(other);
                    for (std::size_t k = 0; k < d; ++k) {
                        dc[k] += ds * zo[k];
                        dn[k] += ds * zc[k];
                    }
                };
                accumulate(shared->positives[tix], beta);
                accumulate(shared->negatives[tix], -(1.0 - beta));
            }
        });
}

LossReport make_loss_report(double j, double r, double l2, double lambda) {
    LossReport rep;
    rep.j = j;
    rep.r = r;
    rep.l2 = l2;
    rep.total = j + r + lambda * l2;
    return rep;
}

} // namespace gesm
