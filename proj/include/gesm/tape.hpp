#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "gesm/csr.hpp"
#include "gesm/matrix.hpp"
#include "gesm/rng.hpp"

namespace gesm {

class Tape;
using TensorId = std::int32_t;

/// Handle to a value recorded on a tape. Cheap to copy; owns nothing.
struct Tensor {
    TensorId id = -1;
    Tape* tape = nullptr;
};

/// Reverse-mode differentiation tape. One training step builds one tape:
/// leaves for parameters and inputs, one node per operation, then a single
/// backward() from a scalar loss. Nodes are stored in construction order,
/// which is already topological, so backward is one descending sweep that
/// visits each node exactly once.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Tensor leaf(Matrix value, bool requires_grad = false);

    // ---- forward operator set ----
    Tensor matmul(Tensor a, Tensor b);
    /// S·M with S constant (not differentiated). `s_transpose` backs the
    /// gradient S'·G and is expected to be built once per graph and reused.
    Tensor spmm(const CsrMatrix& s, const CsrMatrix& s_transpose, Tensor m);
    /// Elementwise add; `b` may be a 1×cols row vector broadcast over rows.
    Tensor add(Tensor a, Tensor b);
    /// Elementwise product; `b` may be a 1×cols row vector broadcast over rows.
    Tensor mul(Tensor a, Tensor b);
    Tensor concat_cols(std::span<const Tensor> parts);
    Tensor elu(Tensor x);
    Tensor sigmoid(Tensor x);
    Tensor row_softmax(Tensor x);
    Tensor scale(Tensor x, double c);
    Tensor sum_all(Tensor x);
    Tensor l2_norm_sq(std::span<const Tensor> params);
    /// Identity in eval mode and at p = 0; otherwise zeroes entries with
    /// probability p and scales survivors by 1/(1-p).
    Tensor dropout(Tensor x, double p, Rng& rng, bool train);

    /// How a per-edge interaction score is pooled into one logit.
    enum class EdgePooling {
        DotProduct, // sum_d e_u[d]*e_v[d]
        OuterSum,   // (sum_a e_u[a]) * (sum_b e_v[b])
    };
    /// Per-edge logits over a fixed CSR pattern: one scalar per stored (u,v),
    /// returned as an (nnz, 1) tensor aligned with the pattern's entries.
    Tensor edge_bilinear(const CsrMatrix& pattern, Tensor e,
                         EdgePooling pooling = EdgePooling::DotProduct);
    /// Softmax over each row's stored entries (max-subtracted), keeping the
    /// pattern's sparsity. Input and output are (nnz, 1) value tensors.
    Tensor edge_row_softmax(const CsrMatrix& pattern, Tensor logits);
    /// (pattern, vals)·Z where vals is an (nnz, 1) tensor of edge weights.
    /// `pattern_t` and `perm` come from transpose(pattern, &perm).
    Tensor pattern_spmm(const CsrMatrix& pattern, const CsrMatrix& pattern_t,
                        std::span<const std::uint32_t> perm, Tensor vals, Tensor z);

    // ---- extension point (loss nodes live in losses.cpp) ----
    using Vjp = std::function<void(Tape&, const Matrix& upstream)>;
    Tensor make_node(Matrix value, std::span<const Tensor> parents, Vjp vjp);

    /// Propagate d(loss)/d(node) to every recorded node. `loss` must be a
    /// 1×1 tensor of this tape; callable once per tape.
    void backward(Tensor loss);

    // ---- access ----
    const Matrix& value(Tensor t) const;
    /// Gradient accumulated by backward(); a zero matrix when nothing reached
    /// the node. Requires the tensor to have requires_grad.
    const Matrix& grad(Tensor t);
    bool requires_grad(Tensor t) const;
    std::size_t rows(Tensor t) const { return value(t).rows; }
    std::size_t cols(Tensor t) const { return value(t).cols; }
    std::size_t node_count() const { return nodes_.size(); }

    /// Gradient accumulation buffer for use inside Vjp callbacks.
    Matrix& grad_buffer(Tensor t);
    bool wants_grad(Tensor t) const;

private:
    struct Node {
        Matrix value;
        Matrix grad; // allocated lazily on first accumulation
        std::vector<TensorId> parents;
        Vjp vjp; // empty for leaves and grad-free nodes
        bool requires_grad = false;
        bool grad_touched = false;
    };

    Tensor push(Matrix value, std::span<const Tensor> parents);
    void set_vjp(Tensor t, Vjp vjp);
    Node& node_at(Tensor t);
    const Node& node_at(Tensor t) const;

    const Matrix& val(TensorId id) const { return nodes_[id].value; }
    bool wants(TensorId id) const { return nodes_[id].requires_grad; }
    Matrix& gbuf(TensorId id);

    // Deque so that value/grad references stay valid while later ops record.
    std::deque<Node> nodes_;
    bool backward_done_ = false;
};

} // namespace gesm
