#include "gesm/model.hpp"

#include <bit>
#include <fstream>
#include <utility>

#include "gesm/dataset.hpp"
#include "gesm/error.hpp"
#include "gesm/optim.hpp"

namespace gesm {

namespace {

void check_dims(const GesmDims& dims, const GesmVariant& variant) {
    if (dims.f == 0 || dims.h == 0 || dims.c == 0) {
        throw DimensionError("model dims must be positive (f=" + std::to_string(dims.f) +
                             " h=" + std::to_string(dims.h) + " c=" + std::to_string(dims.c) +
                             ")");
    }
    if (variant.use_attention) {
        if (dims.heads == 0 || dims.h % dims.heads != 0) {
            throw DimensionError("hidden width " + std::to_string(dims.h) +
                                 " is not divisible into " + std::to_string(dims.heads) +
                                 " heads");
        }
    }
}

void check_weight(const Matrix& w, std::size_t rows, std::size_t cols, const char* name) {
    if (w.rows != rows || w.cols != cols) {
        throw DimensionError(std::string(name) + " is (" + std::to_string(w.rows) + ", " +
                             std::to_string(w.cols) + "), expected (" + std::to_string(rows) +
                             ", " + std::to_string(cols) + ")");
    }
    if (!all_finite(w)) {
        throw NumericError(std::string(name) + " contains non-finite values");
    }
}

} // namespace

GesmParams make_params(const GesmDims& dims, const GesmVariant& variant, Rng& rng) {
    check_dims(dims, variant);
    GesmParams p;
    p.dims = dims;
    p.variant = variant;
    if (variant.use_attention) {
        const std::size_t hw = dims.head_width();
        p.w_heads.reserve(dims.heads);
        p.a_heads.reserve(dims.heads);
        for (std::size_t i = 0; i < dims.heads; ++i) {
            p.w_heads.push_back(glorot_init(dims.f, hw, rng));
            p.a_heads.push_back(glorot_init(1, hw, rng));
        }
    } else {
        p.w_embed = glorot_init(dims.f, dims.h, rng);
    }
    p.w_pred = glorot_init(dims.mixture_width(), dims.c, rng);
    p.b_pred = Matrix::zeros(1, dims.c);
    return p;
}

void check_params(const GesmParams& p) {
    check_dims(p.dims, p.variant);
    if (p.variant.use_attention) {
        if (p.w_heads.size() != p.dims.heads || p.a_heads.size() != p.dims.heads) {
            throw DimensionError("expected " + std::to_string(p.dims.heads) +
                                 " attention heads, have " + std::to_string(p.w_heads.size()) +
                                 " projections and " + std::to_string(p.a_heads.size()) +
                                 " head vectors");
        }
        const std::size_t hw = p.dims.head_width();
        for (std::size_t i = 0; i < p.dims.heads; ++i) {
            check_weight(p.w_heads[i], p.dims.f, hw, "head projection");
            check_weight(p.a_heads[i], 1, hw, "head vector");
        }
        if (!p.w_embed.empty()) {
            throw ValueError("attention parameters must not carry w_embed");
        }
    } else {
        check_weight(p.w_embed, p.dims.f, p.dims.h, "w_embed");
        if (!p.w_heads.empty() || !p.a_heads.empty()) {
            throw ValueError("non-attention parameters must not carry heads");
        }
    }
    check_weight(p.w_pred, p.dims.mixture_width(), p.dims.c, "w_pred");
    check_weight(p.b_pred, 1, p.dims.c, "b_pred");
}

namespace {

constexpr char kParamsMagic[4] = {'G', 'E', 'S', 'W'};
constexpr std::uint32_t kParamsVersion = 1;

void put_u32p(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.put(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void put_u64p(std::ostream& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.put(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

std::uint32_t get_u32p(std::istream& in) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        const int ch = in.get();
        if (ch == std::istream::traits_type::eof()) {
            throw SizeError("parameter file truncated");
        }
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(ch)) << (8 * i);
    }
    return v;
}

std::uint64_t get_u64p(std::istream& in) {
    std::uint64_t v = static_cast<std::uint64_t>(get_u32p(in));
    v |= static_cast<std::uint64_t>(get_u32p(in)) << 32;
    return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
    put_u64p(out, m.rows);
    put_u64p(out, m.cols);
    for (double v : m.data) {
        put_u64p(out, std::bit_cast<std::uint64_t>(v));
    }
}

Matrix get_matrix(std::istream& in) {
    const std::size_t rows = static_cast<std::size_t>(get_u64p(in));
    const std::size_t cols = static_cast<std::size_t>(get_u64p(in));
    if (rows > 0xffffffffull || cols > 0xffffffffull) {
        throw FormatError("parameter matrix shape is implausibly large");
    }
    Matrix m(rows, cols);
    for (double& v : m.data) {
        v = std::bit_cast<double>(get_u64p(in));
    }
    return m;
}

} // namespace

void save_params(const GesmParams& p, const std::string& path) {
    check_params(p);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    out.write(kParamsMagic, 4);
    put_u32p(out, kParamsVersion);
    out.put(static_cast<char>((p.variant.use_attention ? 1 : 0) |
                              (p.variant.use_regularizer ? 2 : 0)));
    put_u64p(out, p.dims.f);
    put_u64p(out, p.dims.h);
    put_u64p(out, p.dims.c);
    put_u64p(out, p.dims.steps);
    put_u64p(out, p.dims.heads);
    if (p.variant.use_attention) {
        for (std::size_t i = 0; i < p.dims.heads; ++i) {
            put_matrix(out, p.w_heads[i]);
            put_matrix(out, p.a_heads[i]);
        }
    } else {
        put_matrix(out, p.w_embed);
    }
    put_matrix(out, p.w_pred);
    put_matrix(out, p.b_pred);
    if (!out) {
        throw IoError("write to " + path + " failed");
    }
}

GesmParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || !std::equal(magic, magic + 4, kParamsMagic)) {
        throw FormatError(path + " is not a parameter file");
    }
    const std::uint32_t version = get_u32p(in);
    if (version != kParamsVersion) {
        throw FormatError("unsupported parameter file version " + std::to_string(version));
    }
    const int flags = in.get();
    if (flags < 0 || flags > 3) {
        throw FormatError("unknown parameter flags");
    }
    GesmParams p;
    p.variant.use_attention = (flags & 1) != 0;
    p.variant.use_regularizer = (flags & 2) != 0;
    p.dims.f = static_cast<std::size_t>(get_u64p(in));
    p.dims.h = static_cast<std::size_t>(get_u64p(in));
    p.dims.c = static_cast<std::size_t>(get_u64p(in));
    p.dims.steps = static_cast<std::size_t>(get_u64p(in));
    p.dims.heads = static_cast<std::size_t>(get_u64p(in));
    if (p.variant.use_attention) {
        for (std::size_t i = 0; i < p.dims.heads; ++i) {
            p.w_heads.push_back(get_matrix(in));
            p.a_heads.push_back(get_matrix(in));
        }
    } else {
        p.w_embed = get_matrix(in);
    }
    p.w_pred = get_matrix(in);
    p.b_pred = get_matrix(in);
    check_params(p);
    return p;
}

GraphOperators build_graph_operators(std::size_t n, const std::vector<Edge>& edges) {
    GraphOperators ops;
    ops.adjacency = csr_from_edges(n, n, edges);
    ops.pattern = add_self_loops(ops.adjacency);
    ops.pattern_t = transpose(ops.pattern, &ops.perm);
    ops.a_hat = column_normalize(ops.pattern);
    ops.a_hat_t = transpose(ops.a_hat);
    return ops;
}

GraphOperators build_graph_operators(const GraphDataset& ds) {
    return build_graph_operators(ds.n, ds.edges);
}

std::vector<Tensor> GesmStage::trainable() const {
    std::vector<Tensor> out;
    if (w_embed.tape != nullptr) {
        out.push_back(w_embed);
    }
    for (std::size_t i = 0; i < w_heads.size(); ++i) {
        out.push_back(w_heads[i]);
        out.push_back(a_heads[i]);
    }
    out.push_back(w_pred);
    out.push_back(b_pred);
    return out;
}

std::vector<Tensor> GesmStage::weights() const {
    std::vector<Tensor> out = trainable();
    out.pop_back(); // the bias row is last
    return out;
}

GesmStage stage_params(Tape& tape, const GesmParams& p, bool requires_grad) {
    check_params(p);
    GesmStage st;
    if (p.variant.use_attention) {
        for (std::size_t i = 0; i < p.dims.heads; ++i) {
            st.w_heads.push_back(tape.leaf(p.w_heads[i], requires_grad));
            st.a_heads.push_back(tape.leaf(p.a_heads[i], requires_grad));
        }
    } else {
        st.w_embed = tape.leaf(p.w_embed, requires_grad);
    }
    st.w_pred = tape.leaf(p.w_pred, requires_grad);
    st.b_pred = tape.leaf(p.b_pred, requires_grad);
    return st;
}

std::vector<Matrix*> param_list(GesmParams& p) {
    std::vector<Matrix*> out;
    if (!p.variant.use_attention) {
        out.push_back(&p.w_embed);
    }
    for (std::size_t i = 0; i < p.w_heads.size(); ++i) {
        out.push_back(&p.w_heads[i]);
        out.push_back(&p.a_heads[i]);
    }
    out.push_back(&p.w_pred);
    out.push_back(&p.b_pred);
    return out;
}

GesmForward gesm_forward(Tape& tape, const GesmStage& stage, Tensor x,
                         const GraphOperators& ops, const GesmParams& params,
                         double dropout_p, Rng& dropout_rng, bool train, bool multi_label,
                         Tape::EdgePooling pooling) {
    const Tensor xd = tape.dropout(x, dropout_p, dropout_rng, train);
    Tensor h;
    if (params.variant.use_attention) {
        std::vector<Tensor> head_outputs;
        head_outputs.reserve(params.dims.heads);
        for (std::size_t i = 0; i < params.dims.heads; ++i) {
            const Tensor z = tape.elu(tape.matmul(xd, stage.w_heads[i]));
            const Tensor e = tape.mul(z, stage.a_heads[i]);
            const Tensor logits = tape.edge_bilinear(ops.pattern, e, pooling);
            const Tensor alpha = tape.edge_row_softmax(ops.pattern, logits);
            const Tensor mixed =
                tape.pattern_spmm(ops.pattern, ops.pattern_t, ops.perm, alpha, z);
            head_outputs.push_back(tape.elu(mixed));
        }
        h = tape.concat_cols(head_outputs);
    } else {
        h = tape.elu(tape.matmul(xd, stage.w_embed));
    }
    std::vector<Tensor> mixture;
    mixture.reserve(params.dims.steps + 1);
    mixture.push_back(h);
    Tensor cur = h;
    for (std::size_t k = 0; k < params.dims.steps; ++k) {
        cur = tape.spmm(ops.a_hat, ops.a_hat_t, cur);
        mixture.push_back(cur);
    }
    const Tensor f_cat = tape.concat_cols(mixture);
    const Tensor fd = tape.dropout(f_cat, dropout_p, dropout_rng, train);
    const Tensor logits = tape.add(tape.matmul(fd, stage.w_pred), stage.b_pred);
    GesmForward out;
    out.output = multi_label ? tape.sigmoid(logits) : tape.row_softmax(logits);
    out.reg_embedding = h;
    return out;
}

GesmEval gesm_eval(const GesmParams& params, const Matrix& x, const GraphOperators& ops,
                   bool multi_label, Tape::EdgePooling pooling) {
    Tape tape;
    const Tensor xt = tape.leaf(x, false);
    const GesmStage stage = stage_params(tape, params, false);
    Rng unused(0);
    const GesmForward fwd = gesm_forward(tape, stage, xt, ops, params, 0.0, unused,
                                         false, multi_label, pooling);
    return GesmEval{tape.value(fwd.output), tape.value(fwd.reg_embedding)};
}

Matrix embed(const Matrix& x, const Matrix& w_embed) {
    Tape tape;
    const Tensor xt = tape.leaf(x, false);
    const Tensor wt = tape.leaf(w_embed, false);
    return tape.value(tape.elu(tape.matmul(xt, wt)));
}

Matrix attention_encodings(const Matrix& z_head, const Matrix& a_head) {
    Tape tape;
    const Tensor zt = tape.leaf(z_head, false);
    const Tensor at = tape.leaf(a_head, false);
    return tape.value(tape.mul(zt, at));
}

CsrMatrix attention_matrix(const Matrix& encodings, const CsrMatrix& pattern,
                           Tape::EdgePooling pooling) {
    validate_csr(pattern);
    for (std::size_t i = 0; i < pattern.n_rows; ++i) {
        if (pattern.row_offsets[i] == pattern.row_offsets[i + 1]) {
            throw ValueError("attention pattern row " + std::to_string(i) +
                             " is empty; add self-loops first");
        }
    }
    Tape tape;
    const Tensor et = tape.leaf(encodings, false);
    const Tensor logits = tape.edge_bilinear(pattern, et, pooling);
    const Tensor alpha = tape.edge_row_softmax(pattern, logits);
    CsrMatrix out = pattern;
    out.values = tape.value(alpha).data;
    return out;
}

Matrix attention_feature(const Matrix& x, const GesmParams& params, const GraphOperators& ops,
                         Tape::EdgePooling pooling) {
    if (!params.variant.use_attention) {
        throw ValueError("attention_feature requires attention parameters");
    }
    Tape tape;
    const Tensor xt = tape.leaf(x, false);
    const GesmStage stage = stage_params(tape, params, false);
    std::vector<Tensor> head_outputs;
    for (std::size_t i = 0; i < params.dims.heads; ++i) {
        const Tensor z = tape.elu(tape.matmul(xt, stage.w_heads[i]));
        const Tensor e = tape.mul(z, stage.a_heads[i]);
        const Tensor logits = tape.edge_bilinear(ops.pattern, e, pooling);
        const Tensor alpha = tape.edge_row_softmax(ops.pattern, logits);
        head_outputs.push_back(
            tape.elu(tape.pattern_spmm(ops.pattern, ops.pattern_t, ops.perm, alpha, z)));
    }
    return tape.value(tape.concat_cols(head_outputs));
}

Matrix step_mixture(const Matrix& h, const CsrMatrix& transition, std::size_t steps) {
    const CsrMatrix transition_t = transpose(transition);
    Tape tape;
    const Tensor ht = tape.leaf(h, false);
    std::vector<Tensor> mixture{ht};
    Tensor cur = ht;
    for (std::size_t k = 0; k < steps; ++k) {
        cur = tape.spmm(transition, transition_t, cur);
        mixture.push_back(cur);
    }
    return tape.value(tape.concat_cols(mixture));
}

Matrix predict(const Matrix& f_cat, const Matrix& w_pred, const Matrix& b_pred,
               bool multi_label) {
    Tape tape;
    const Tensor ft = tape.leaf(f_cat, false);
    const Tensor wt = tape.leaf(w_pred, false);
    const Tensor bt = tape.leaf(b_pred, false);
    const Tensor logits = tape.add(tape.matmul(ft, wt), bt);
    return tape.value(multi_label ? tape.sigmoid(logits) : tape.row_softmax(logits));
}

} // namespace gesm
