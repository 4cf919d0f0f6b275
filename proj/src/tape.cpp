#include "gesm/tape.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "gesm/error.hpp"

namespace gesm {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shapes (" + std::to_string(a.rows) + ", " +
                             std::to_string(a.cols) + ") and (" + std::to_string(b.rows) + ", " +
                             std::to_string(b.cols) + ") do not match");
    }
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

Tape::Node& Tape::node_at(Tensor t) {
    if (t.tape != this) {
        throw ValueError("tensor does not belong to this tape");
    }
    if (t.id < 0 || static_cast<std::size_t>(t.id) >= nodes_.size()) {
        throw ValueError("tensor id " + std::to_string(t.id) + " out of range");
    }
    return nodes_[static_cast<std::size_t>(t.id)];
}

const Tape::Node& Tape::node_at(Tensor t) const {
    return const_cast<Tape*>(this)->node_at(t);
}

Matrix& Tape::gbuf(TensorId id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.data.empty() || !n.grad.same_shape(n.value)) {
        n.grad = Matrix::zeros(n.value.rows, n.value.cols);
    }
    n.grad_touched = true;
    return n.grad;
}

Tensor Tape::push(Matrix value, std::span<const Tensor> parents) {
    if (nodes_.size() >= static_cast<std::size_t>(std::numeric_limits<TensorId>::max())) {
        throw SizeError("tape node limit exceeded");
    }
    Node n;
    n.value = std::move(value);
    n.parents.reserve(parents.size());
    for (Tensor p : parents) {
        const Node& pn = node_at(p);
        n.parents.push_back(p.id);
        n.requires_grad = n.requires_grad || pn.requires_grad;
    }
    nodes_.push_back(std::move(n));
    return Tensor{static_cast<TensorId>(nodes_.size() - 1), this};
}

void Tape::set_vjp(Tensor t, Vjp vjp) {
    node_at(t).vjp = std::move(vjp);
}

Tensor Tape::leaf(Matrix value, bool requires_grad) {
    Tensor t = push(std::move(value), {});
    node_at(t).requires_grad = requires_grad;
    return t;
}

Tensor Tape::make_node(Matrix value, std::span<const Tensor> parents, Vjp vjp) {
    Tensor t = push(std::move(value), parents);
    if (node_at(t).requires_grad) {
        set_vjp(t, std::move(vjp));
    }
    return t;
}

const Matrix& Tape::value(Tensor t) const {
    return node_at(t).value;
}

bool Tape::requires_grad(Tensor t) const {
    return node_at(t).requires_grad;
}

bool Tape::wants_grad(Tensor t) const {
    return node_at(t).requires_grad;
}

const Matrix& Tape::grad(Tensor t) {
    if (!node_at(t).requires_grad) {
        throw ValueError("gradient requested for a tensor that does not require it");
    }
    return gbuf(t.id);
}

Matrix& Tape::grad_buffer(Tensor t) {
    node_at(t);
    return gbuf(t.id);
}

void Tape::backward(Tensor loss) {
    const Node& ln = node_at(loss);
    if (!ln.value.is_scalar()) {
        throw DimensionError("backward: loss must be 1x1, got (" + std::to_string(ln.value.rows) +
                             ", " + std::to_string(ln.value.cols) + ")");
    }
    if (!ln.requires_grad) {
        throw ValueError("backward: loss does not depend on any differentiable leaf");
    }
    if (backward_done_) {
        throw ValueError("backward: tape already differentiated");
    }
    backward_done_ = true;
    gbuf(loss.id).at(0, 0) = 1.0;
    for (TensorId id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad_touched && n.vjp) {
            n.vjp(*this, n.grad);
        }
    }
}

// ---- binary dense ops ----

Tensor Tape::matmul(Tensor a, Tensor b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    Tensor out = push(gesm::matmul(av, bv), {{a, b}});
    const TensorId ia = a.id;
    const TensorId ib = b.id;
    set_vjp(out, [ia, ib](Tape& t, const Matrix& g) {
        if (t.wants(ia)) {
            matmul_nt_acc(g, t.val(ib), t.gbuf(ia));
        }
        if (t.wants(ib)) {
            matmul_tn_acc(t.val(ia), g, t.gbuf(ib));
        }
    });
    return out;
}

Tensor Tape::spmm(const CsrMatrix& s, const CsrMatrix& s_transpose, Tensor m) {
    const Matrix& mv = value(m);
    if (s_transpose.n_rows != s.n_cols || s_transpose.n_cols != s.n_rows ||
        s_transpose.nnz() != s.nnz()) {
        throw DimensionError("spmm: s_transpose does not mirror s");
    }
    Tensor out = push(gesm::spmm(s, mv), {{m}});
    const TensorId im = m.id;
    const CsrMatrix* st = &s_transpose;
    set_vjp(out, [im, st](Tape& t, const Matrix& g) {
        if (t.wants(im)) {
            spmm_acc(*st, g, t.gbuf(im));
        }
    });
    return out;
}

Tensor Tape::add(Tensor a, Tensor b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    const bool broadcast = bv.rows == 1 && bv.cols == av.cols && av.rows != 1;
    if (!broadcast) {
        check_same_shape(av, bv, "add");
    }
    Matrix out_v = av;
    if (broadcast) {
        for (std::size_t i = 0; i < out_v.rows; ++i) {
            for (std::size_t j = 0; j < out_v.cols; ++j) {
                out_v.at(i, j) += bv.at(0, j);
            }
        }
    } else {
        add_into(out_v, bv);
    }
    Tensor out = push(std::move(out_v), {{a, b}});
    const TensorId ia = a.id;
    const TensorId ib = b.id;
    set_vjp(out, [ia, ib, broadcast](Tape& t, const Matrix& g) {
        if (t.wants(ia)) {
            add_into(t.gbuf(ia), g);
        }
        if (t.wants(ib)) {
            Matrix& db = t.gbuf(ib);
            if (broadcast) {
                for (std::size_t i = 0; i < g.rows; ++i) {
                    for (std::size_t j = 0; j < g.cols; ++j) {
                        db.at(0, j) += g.at(i, j);
                    }
                }
            } else {
                add_into(db, g);
            }
        }
    });
    return out;
}

Tensor Tape::mul(Tensor a, Tensor b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    const bool broadcast = bv.rows == 1 && bv.cols == av.cols && av.rows != 1;
    if (!broadcast) {
        check_same_shape(av, bv, "mul");
    }
    Matrix out_v(av.rows, av.cols);
    for (std::size_t i = 0; i < av.rows; ++i) {
        for (std::size_t j = 0; j < av.cols; ++j) {
            out_v.at(i, j) = av.at(i, j) * bv.at(broadcast ? 0 : i, j);
        }
    }
    Tensor out = push(std::move(out_v), {{a, b}});
    const TensorId ia = a.id;
    const TensorId ib = b.id;
    set_vjp(out, [ia, ib, broadcast](Tape& t, const Matrix& g) {
        const Matrix& av2 = t.val(ia);
        const Matrix& bv2 = t.val(ib);
        if (t.wants(ia)) {
            Matrix& da = t.gbuf(ia);
            for (std::size_t i = 0; i < g.rows; ++i) {
                for (std::size_t j = 0; j < g.cols; ++j) {
                    da.at(i, j) += g.at(i, j) * bv2.at(broadcast ? 0 : i, j);
                }
            }
        }
        if (t.wants(ib)) {
            Matrix& db = t.gbuf(ib);
            for (std::size_t i = 0; i < g.rows; ++i) {
                for (std::size_t j = 0; j < g.cols; ++j) {
                    db.at(broadcast ? 0 : i, j) += g.at(i, j) * av2.at(i, j);
                }
            }
        }
    });
    return out;
}

Tensor Tape::concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw ValueError("concat_cols: no tensors given");
    }
    const std::size_t n = value(parts[0]).rows;
    std::size_t total = 0;
    for (Tensor p : parts) {
        const Matrix& pv = value(p);
        if (pv.rows != n) {
            throw DimensionError("concat_cols: row counts differ (" + std::to_string(n) + " vs " +
                                 std::to_string(pv.rows) + ")");
        }
        total += pv.cols;
    }
    Matrix out_v(n, total);
    std::size_t off = 0;
    for (Tensor p : parts) {
        const Matrix& pv = value(p);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < pv.cols; ++j) {
                out_v.at(i, off + j) = pv.at(i, j);
            }
        }
        off += pv.cols;
    }
    Tensor out = push(std::move(out_v), parts);
    struct Piece {
        TensorId id;
        std::size_t offset;
        std::size_t cols;
    };
    std::vector<Piece> pieces;
    pieces.reserve(parts.size());
    off = 0;
    for (Tensor p : parts) {
        pieces.push_back({p.id, off, value(p).cols});
        off += value(p).cols;
    }
    set_vjp(out, [pieces](Tape& t, const Matrix& g) {
        for (const Piece& pc : pieces) {
            if (t.wants(pc.id)) {
                acc_col_slice(t.gbuf(pc.id), g, pc.offset);
            }
        }
    });
    return out;
}

// ---- elementwise nonlinearities ----

Tensor Tape::elu(Tensor x) {
    const Matrix& xv = value(x);
    Matrix out_v(xv.rows, xv.cols);
    for (std::size_t k = 0; k < xv.size(); ++k) {
        const double v = xv.data[k];
        out_v.data[k] = v > 0.0 ? v : std::expm1(v);
    }
    Tensor out = push(std::move(out_v), {{x}});
    const TensorId ix = x.id;
    const TensorId io = out.id;
    set_vjp(out, [ix, io](Tape& t, const Matrix& g) {
        if (!t.wants(ix)) {
            return;
        }
        const Matrix& y = t.val(io);
        Matrix& dx = t.gbuf(ix);
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double slope = y.data[k] > 0.0 ? 1.0 : y.data[k] + 1.0;
            dx.data[k] += g.data[k] * slope;
        }
    });
    return out;
}

Tensor Tape::sigmoid(Tensor x) {
    const Matrix& xv = value(x);
    Matrix out_v(xv.rows, xv.cols);
    for (std::size_t k = 0; k < xv.size(); ++k) {
        out_v.data[k] = stable_sigmoid(xv.data[k]);
    }
    Tensor out = push(std::move(out_v), {{x}});
    const TensorId ix = x.id;
    const TensorId io = out.id;
    set_vjp(out, [ix, io](Tape& t, const Matrix& g) {
        if (!t.wants(ix)) {
            return;
        }
        const Matrix& y = t.val(io);
        Matrix& dx = t.gbuf(ix);
        for (std::size_t k = 0; k < g.size(); ++k) {
            dx.data[k] += g.data[k] * y.data[k] * (1.0 - y.data[k]);
        }
    });
    return out;
}

Tensor Tape::row_softmax(Tensor x) {
    const Matrix& xv = value(x);
    if (xv.cols == 0) {
        throw DimensionError("row_softmax: zero columns");
    }
    Matrix out_v(xv.rows, xv.cols);
    for (std::size_t i = 0; i < xv.rows; ++i) {
        double m = xv.at(i, 0);
        for (std::size_t j = 1; j < xv.cols; ++j) {
            m = std::max(m, xv.at(i, j));
        }
        double s = 0.0;
        for (std::size_t j = 0; j < xv.cols; ++j) {
            const double e = std::exp(xv.at(i, j) - m);
            out_v.at(i, j) = e;
            s += e;
        }
        for (std::size_t j = 0; j < xv.cols; ++j) {
            out_v.at(i, j) /= s;
        }
    }
    Tensor out = push(std::move(out_v), {{x}});
    const TensorId ix = x.id;
    const TensorId io = out.id;
    set_vjp(out, [ix, io](Tape& t, const Matrix& g) {
        if (!t.wants(ix)) {
            return;
        }
        const Matrix& y = t.val(io);
        Matrix& dx = t.gbuf(ix);
        for (std::size_t i = 0; i < g.rows; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < g.cols; ++j) {
                dot += g.at(i, j) * y.at(i, j);
            }
            for (std::size_t j = 0; j < g.cols; ++j) {
                dx.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
            }
        }
    });
    return out;
}

// ---- scalars and reductions ----

Tensor Tape::scale(Tensor x, double c) {
    const Matrix& xv = value(x);
    Matrix out_v = xv;
    for (double& v : out_v.data) {
        v *= c;
    }
    Tensor out = push(std::move(out_v), {{x}});
    const TensorId ix = x.id;
    set_vjp(out, [ix, c](Tape& t, const Matrix& g) {
        if (t.wants(ix)) {
            axpy_into(t.gbuf(ix), c, g);
        }
    });
    return out;
}

Tensor Tape::sum_all(Tensor x) {
    const Matrix& xv = value(x);
    double s = 0.0;
    for (double v : xv.data) {
        s += v;
    }
    Tensor out = push(Matrix::filled(1, 1, s), {{x}});
    const TensorId ix = x.id;
    set_vjp(out, [ix](Tape& t, const Matrix& g) {
        if (!t.wants(ix)) {
            return;
        }
        Matrix& dx = t.gbuf(ix);
        const double u = g.at(0, 0);
        for (double& v : dx.data) {
            v += u;
        }
    });
    return out;
}

Tensor Tape::l2_norm_sq(std::span<const Tensor> params) {
    double s = 0.0;
    for (Tensor p : params) {
        for (double v : value(p).data) {
            s += v * v;
        }
    }
    Tensor out = push(Matrix::filled(1, 1, s), params);
    std::vector<TensorId> ids;
    ids.reserve(params.size());
    for (Tensor p : params) {
        ids.push_back(p.id);
    }
    set_vjp(out, [ids](Tape& t, const Matrix& g) {
        const double u = g.at(0, 0);
        for (TensorId id : ids) {
            if (!t.wants(id)) {
                continue;
            }
            const Matrix& pv = t.val(id);
            Matrix& dp = t.gbuf(id);
            for (std::size_t k = 0; k < pv.size(); ++k) {
                dp.data[k] += 2.0 * u * pv.data[k];
            }
        }
    });
    return out;
}

Tensor Tape::dropout(Tensor x, double p, Rng& rng, bool train) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ValueError("dropout: rate must lie in [0, 1), got " + std::to_string(p));
    }
    if (!train || p == 0.0) {
        return x;
    }
    const Matrix& xv = value(x);
    const double keep_scale = 1.0 / (1.0 - p);
    auto mask = std::make_shared<Matrix>(xv.rows, xv.cols);
    Matrix out_v(xv.rows, xv.cols);
    for (std::size_t k = 0; k < xv.size(); ++k) {
        const double m = rng.bernoulli(1.0 - p) ? keep_scale : 0.0;
        mask->data[k] = m;
        out_v.data[k] = xv.data[k] * m;
    }
    Tensor out = push(std::move(out_v), {{x}});
    const TensorId ix = x.id;
    set_vjp(out, [ix, mask](Tape& t, const Matrix& g) {
        if (!t.wants(ix)) {
            return;
        }
        Matrix& dx = t.gbuf(ix);
        for (std::size_t k = 0; k < g.size(); ++k) {
            dx.data[k] += g.data[k] * mask->data[k];
        }
    });
    return out;
}

// ---- sparse-pattern attention ops ----

Tensor Tape::edge_bilinear(const CsrMatrix& pattern, Tensor e, EdgePooling pooling) {
    const Matrix& ev = value(e);
    if (pattern.n_rows != ev.rows || pattern.n_cols != ev.rows) {
        throw DimensionError("edge_bilinear: pattern is " + std::to_string(pattern.n_rows) + "x" +
                             std::to_string(pattern.n_cols) + " but encodings have " +
                             std::to_string(ev.rows) + " rows");
    }
    const std::size_t d = ev.cols;
    Matrix out_v(pattern.nnz(), 1);
    if (pooling == EdgePooling::DotProduct) {
        for (std::size_t u = 0; u < pattern.n_rows; ++u) {
            for (std::size_t k = pattern.row_offsets[u]; k < pattern.row_offsets[u + 1]; ++k) {
                const std::uint32_t v = pattern.col_indices[k];
                double s = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    s += ev.at(u, j) * ev.at(v, j);
                }
                out_v.data[k] = s;
            }
        }
    } else {
        std::vector<double> row_sum(ev.rows, 0.0);
        for (std::size_t u = 0; u < ev.rows; ++u) {
            for (std::size_t j = 0; j < d; ++j) {
                row_sum[u] += ev.at(u, j);
            }
        }
        for (std::size_t u = 0; u < pattern.n_rows; ++u) {
            for (std::size_t k = pattern.row_offsets[u]; k < pattern.row_offsets[u + 1]; ++k) {
                out_v.data[k] = row_sum[u] * row_sum[pattern.col_indices[k]];
            }
        }
    }
    Tensor out = push(std::move(out_v), {{e}});
    const TensorId ie = e.id;
    const CsrMatrix* pat = &pattern;
    set_vjp(out, [ie, pat, pooling](Tape& t, const Matrix& g) {
        if (!t.wants(ie)) {
            return;
        }
        const Matrix& enc = t.val(ie);
        Matrix& de = t.gbuf(ie);
        const std::size_t d = enc.cols;
        if (pooling == EdgePooling::DotProduct) {
            for (std::size_t u = 0; u < pat->n_rows; ++u) {
                for (std::size_t k = pat->row_offsets[u]; k < pat->row_offsets[u + 1]; ++k) {
                    const std::uint32_t v = pat->col_indices[k];
                    const double gk = g.data[k];
                    for (std::size_t j = 0; j < d; ++j) {
                        de.at(u, j) += gk * enc.at(v, j);
                        de.at(v, j) += gk * enc.at(u, j);
                    }
                }
            }
        } else {
            const std::size_t n = enc.rows;
            std::vector<double> row_sum(n, 0.0);
            std::vector<double> dsum(n, 0.0);
            for (std::size_t u = 0; u < n; ++u) {
                for (std::size_t j = 0; j < d; ++j) {
                    row_sum[u] += enc.at(u, j);
                }
            }
            for (std::size_t u = 0; u < pat->n_rows; ++u) {
                for (std::size_t k = pat->row_offsets[u]; k < pat->row_offsets[u + 1]; ++k) {
                    const std::uint32_t v = pat->col_indices[k];
                    dsum[u] += g.data[k] * row_sum[v];
                    dsum[v] += g.data[k] * row_sum[u];
                }
            }
            for (std::size_t u = 0; u < n; ++u) {
                for (std::size_t j = 0; j < d; ++j) {
                    de.at(u, j) += dsum[u];
                }
            }
        }
    });
    return out;
}

Tensor Tape::edge_row_softmax(const CsrMatrix& pattern, Tensor logits) {
    const Matrix& lv = value(logits);
    if (lv.rows != pattern.nnz() || lv.cols != 1) {
        throw DimensionError("edge_row_softmax: expected (" + std::to_string(pattern.nnz()) +
                             ", 1) logits, got (" + std::to_string(lv.rows) + ", " +
                             std::to_string(lv.cols) + ")");
    }
    Matrix out_v(lv.rows, 1);
    for (std::size_t u = 0; u < pattern.n_rows; ++u) {
        const std::size_t b = pattern.row_offsets[u];
        const std::size_t e = pattern.row_offsets[u + 1];
        if (b == e) {
            continue;
        }
        double m = lv.data[b];
        for (std::size_t k = b + 1; k < e; ++k) {
            m = std::max(m, lv.data[k]);
        }
        double s = 0.0;
        for (std::size_t k = b; k < e; ++k) {
            const double ex = std::exp(lv.data[k] - m);
            out_v.data[k] = ex;
            s += ex;
        }
        for (std::size_t k = b; k < e; ++k) {
            out_v.data[k] /= s;
        }
    }
    Tensor out = push(std::move(out_v), {{logits}});
    const TensorId il = logits.id;
    const TensorId io = out.id;
    const CsrMatrix* pat = &pattern;
    set_vjp(out, [il, io, pat](Tape& t, const Matrix& g) {
        if (!t.wants(il)) {
            return;
        }
        const Matrix& y = t.val(io);
        Matrix& dl = t.gbuf(il);
        for (std::size_t u = 0; u < pat->n_rows; ++u) {
            const std::size_t b = pat->row_offsets[u];
            const std::size_t e = pat->row_offsets[u + 1];
            double dot = 0.0;
            for (std::size_t k = b; k < e; ++k) {
                dot += g.data[k] * y.data[k];
            }
            for (std::size_t k = b; k < e; ++k) {
                dl.data[k] += y.data[k] * (g.data[k] - dot);
            }
        }
    });
    return out;
}

Tensor Tape::pattern_spmm(const CsrMatrix& pattern, const CsrMatrix& pattern_t,
                          std::span<const std::uint32_t> perm, Tensor vals, Tensor z) {
    const Matrix& vv = value(vals);
    const Matrix& zv = value(z);
    if (vv.rows != pattern.nnz() || vv.cols != 1) {
        throw DimensionError("pattern_spmm: expected (" + std::to_string(pattern.nnz()) +
                             ", 1) edge values, got (" + std::to_string(vv.rows) + ", " +
                             std::to_string(vv.cols) + ")");
    }
    if (zv.rows != pattern.n_cols) {
        throw DimensionError("pattern_spmm: pattern has " + std::to_string(pattern.n_cols) +
                             " columns but the dense factor has " + std::to_string(zv.rows) +
                             " rows");
    }
    if (pattern_t.n_rows != pattern.n_cols || pattern_t.n_cols != pattern.n_rows ||
        perm.size() != pattern.nnz() || pattern_t.nnz() != pattern.nnz()) {
        throw DimensionError("pattern_spmm: pattern_t/perm do not mirror pattern");
    }
    const std::size_t d = zv.cols;
    Matrix out_v = Matrix::zeros(pattern.n_rows, d);
#pragma omp parallel for schedule(static) if (pattern.n_rows > 255)
    for (std::size_t u = 0; u < pattern.n_rows; ++u) {
        double* dst = out_v.row(u);
        for (std::size_t k = pattern.row_offsets[u]; k < pattern.row_offsets[u + 1]; ++k) {
            const double w = vv.data[k];
            const double* src = zv.row(pattern.col_indices[k]);
            for (std::size_t j = 0; j < d; ++j) {
                dst[j] += w * src[j];
            }
        }
    }
    Tensor out = push(std::move(out_v), {{vals, z}});
    const TensorId iv = vals.id;
    const TensorId iz = z.id;
    const CsrMatrix* pat = &pattern;
    const CsrMatrix* pat_t = &pattern_t;
    set_vjp(out, [iv, iz, pat, pat_t, perm](Tape& t, const Matrix& g) {
        const Matrix& zv2 = t.val(iz);
        const Matrix& vv2 = t.val(iv);
        const std::size_t d = zv2.cols;
        if (t.wants(iv)) {
            Matrix& dv = t.gbuf(iv);
#pragma omp parallel for schedule(static) if (pat->n_rows > 255)
            for (std::size_t u = 0; u < pat->n_rows; ++u) {
                for (std::size_t k = pat->row_offsets[u]; k < pat->row_offsets[u + 1]; ++k) {
                    const double* gr = g.row(u);
                    const double* zr = zv2.row(pat->col_indices[k]);
                    double s = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        s += gr[j] * zr[j];
                    }
                    dv.data[k] += s;
                }
            }
        }
        if (t.wants(iz)) {
            Matrix& dz = t.gbuf(iz);
#pragma omp parallel for schedule(static) if (pat_t->n_rows > 255)
            for (std::size_t v = 0; v < pat_t->n_rows; ++v) {
                double* dst = dz.row(v);
                for (std::size_t k = pat_t->row_offsets[v]; k < pat_t->row_offsets[v + 1]; ++k) {
                    const double w = vv2.data[perm[k]];
                    const double* gr = g.row(pat_t->col_indices[k]);
                    for (std::size_t j = 0; j < d; ++j) {
                        dst[j] += w * gr[j];
                    }
                }
            }
        }
    });
    return out;
}

} // namespace gesm
