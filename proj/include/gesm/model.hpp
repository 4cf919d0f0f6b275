#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gesm/csr.hpp"
#include "gesm/matrix.hpp"
#include "gesm/rng.hpp"
#include "gesm/tape.hpp"

namespace gesm {

struct GraphDataset;

/// Which parts of the full network are active. (false,false) is the plain
/// step-mixture model, (true,false) adds attention, (true,true) is the full
/// model with the triplet regularizer.
struct GesmVariant {
    bool use_attention = true;
    bool use_regularizer = true;

    bool operator==(const GesmVariant&) const = default;
};

struct GesmDims {
    std::size_t f = 0;     // input features
    std::size_t h = 0;     // hidden width (all heads together)
    std::size_t c = 0;     // classes
    std::size_t steps = 0; // propagation steps s; mixture width is (s+1)*h
    std::size_t heads = 1; // attention heads m; h must divide evenly

    std::size_t head_width() const { return heads == 0 ? 0 : h / heads; }
    std::size_t mixture_width() const { return (steps + 1) * h; }

    bool operator==(const GesmDims&) const = default;
};

/// Learnable state. Without attention only w_embed is populated; with
/// attention the per-head projections and head vectors replace it. The
/// prediction layer always carries a bias row.
struct GesmParams {
    GesmDims dims;
    GesmVariant variant;
    Matrix w_embed;               // f x h
    std::vector<Matrix> w_heads;  // m of f x head_width
    std::vector<Matrix> a_heads;  // m of 1 x head_width
    Matrix w_pred;                // mixture_width x c
    Matrix b_pred;                // 1 x c

    bool operator==(const GesmParams&) const = default;
};

/// Validates shapes/divisibility and draws Glorot-initialized weights in a
/// fixed order (per head: projection then head vector; then the prediction
/// layer). Biases start at zero.
GesmParams make_params(const GesmDims& dims, const GesmVariant& variant, Rng& rng);

void check_params(const GesmParams& params);

/// Binary round trip for trained parameters (64-bit exact).
void save_params(const GesmParams& params, const std::string& path);
GesmParams load_params(const std::string& path);

/// Graph matrices shared by every forward pass on one dataset: the raw
/// adjacency (no self-loops; triplet sampling), the self-looped pattern that
/// attention softmaxes over, the column-normalized transition, and the
/// transposes/permutation that back their gradients. Must outlive any tape
/// recorded against it.
struct GraphOperators {
    CsrMatrix adjacency;
    CsrMatrix pattern;
    CsrMatrix pattern_t;
    std::vector<std::uint32_t> perm; // pattern_t entry -> pattern entry
    CsrMatrix a_hat;
    CsrMatrix a_hat_t;
};

GraphOperators build_graph_operators(const GraphDataset& ds);
GraphOperators build_graph_operators(std::size_t n, const std::vector<Edge>& edges);

/// Parameters staged onto a tape as differentiable leaves, in the same fixed
/// order used by the optimizer state.
struct GesmStage {
    Tensor w_embed;
    std::vector<Tensor> w_heads;
    std::vector<Tensor> a_heads;
    Tensor w_pred;
    Tensor b_pred;

    /// All learnable leaves, optimizer order.
    std::vector<Tensor> trainable() const;
    /// Leaves subject to the L2 penalty (biases excluded).
    std::vector<Tensor> weights() const;
};

GesmStage stage_params(Tape& tape, const GesmParams& params, bool requires_grad = true);

/// Mutable views over the matrices of `params` in optimizer order.
std::vector<Matrix*> param_list(GesmParams& params);

struct GesmForward {
    Tensor output;        // (n, c) probabilities
    Tensor reg_embedding; // embedding the triplet regularizer reads (Z or H_multi)
};

/// Full differentiable pass: dropout on inputs, embedding (plain or
/// multi-head attention), iterated transition mixing, concatenation, dropout,
/// linear head, softmax (or sigmoid for multi-label tasks).
GesmForward gesm_forward(Tape& tape, const GesmStage& stage, Tensor x,
                         const GraphOperators& ops, const GesmParams& params,
                         double dropout_p, Rng& dropout_rng, bool train, bool multi_label,
                         Tape::EdgePooling pooling = Tape::EdgePooling::DotProduct);

/// Deterministic eval-mode forward on plain matrices.
struct GesmEval {
    Matrix output;
    Matrix reg_embedding;
};
GesmEval gesm_eval(const GesmParams& params, const Matrix& x, const GraphOperators& ops,
                   bool multi_label, Tape::EdgePooling pooling = Tape::EdgePooling::DotProduct);

// ---- single stages on plain matrices (shared with tests and tooling) ----

/// ELU(x * w_embed).
Matrix embed(const Matrix& x, const Matrix& w_embed);

/// Row-wise hadamard of a head's embedding with its length-h_head vector.
Matrix attention_encodings(const Matrix& z_head, const Matrix& a_head);

/// Neighbor attention over the pattern's sparsity: dot-product logits between
/// encoding rows, softmax per row. Result reuses the pattern's structure.
CsrMatrix attention_matrix(const Matrix& encodings, const CsrMatrix& pattern,
                           Tape::EdgePooling pooling = Tape::EdgePooling::DotProduct);

/// All heads: ELU(alpha_i * ELU(X W_i)) concatenated to width h.
Matrix attention_feature(const Matrix& x, const GesmParams& params, const GraphOperators& ops,
                         Tape::EdgePooling pooling = Tape::EdgePooling::DotProduct);

/// [H, T H, T^2 H, ..., T^s H] built by repeated multiplication.
Matrix step_mixture(const Matrix& h, const CsrMatrix& transition, std::size_t steps);

/// Row softmax (or sigmoid) of f_cat * w_pred + b_pred.
Matrix predict(const Matrix& f_cat, const Matrix& w_pred, const Matrix& b_pred,
               bool multi_label);

} // namespace gesm
