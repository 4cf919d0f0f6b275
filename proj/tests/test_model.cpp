#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <vector>

#include "gesm/error.hpp"
#include "gesm/losses.hpp"
#include "gesm/model.hpp"
#include "gesm/rng.hpp"

#include "support/dense_oracle.hpp"
#include "support/helpers.hpp"
#include "support/model_check.hpp"

using namespace gesm;
using gesm::testing::make_pattern;
using gesm::testing::random_matrix;
using gesm::testing::random_symmetric_edges;

namespace {

Matrix dense_adj(std::size_t n, const std::vector<Edge>& edges) {
    Matrix a(n, n);
    for (const Edge& e : edges) {
        a.at(e.first, e.second) = 1.0;
    }
    return a;
}

GesmParams test_params(const GesmDims& dims, const GesmVariant& variant, std::uint64_t seed) {
    Rng rng(seed);
    return make_params(dims, variant, rng);
}

} // namespace

TEST_CASE("embed applies elu after the projection") {
    CHECK(embed(Matrix::zeros(3, 2), random_matrix(2, 4, 1)) == Matrix::zeros(3, 4));

    const Matrix eye = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    const Matrix x = Matrix::from_rows({{0.5, 2.0}, {0.0, 1.0}});
    CHECK(embed(x, eye) == x); // identity weights, nonnegative input

    const Matrix xr = random_matrix(5, 3, 2);
    const Matrix w = random_matrix(3, 4, 3);
    const Matrix expected = gesm::testing::oracle_elu(gesm::testing::oracle_mm(xr, w));
    CHECK(max_abs_diff(embed(xr, w), expected) < 1e-12);
}

TEST_CASE("embed rejects mismatched shapes") {
    CHECK_THROWS_AS(embed(random_matrix(3, 2, 4), random_matrix(3, 4, 5)), DimensionError);
}

TEST_CASE("attention_encodings is a per-row hadamard with the head vector") {
    const Matrix z = Matrix::from_rows({{1.0, 2.0}, {0.5, -1.0}});
    CHECK(attention_encodings(z, Matrix::from_rows({{1.0, 1.0}})) == z);
    CHECK(attention_encodings(z, Matrix::from_rows({{0.0, 0.0}})) == Matrix::zeros(2, 2));
    const Matrix e = attention_encodings(z, Matrix::from_rows({{3.0, -1.0}}));
    CHECK(e.row_span(0)[0] == 3.0);
    CHECK(e.row_span(0)[1] == -2.0);
    CHECK_THROWS_AS(attention_encodings(z, Matrix::from_rows({{1.0, 2.0, 3.0}})),
                    DimensionError);
}

TEST_CASE("attention_matrix on an isolated node gives weight one to its self-loop") {
    const CsrMatrix pattern = add_self_loops(csr_from_edges(1, 1, std::vector<Edge>{}));
    const CsrMatrix alpha = attention_matrix(random_matrix(1, 3, 6), pattern);
    REQUIRE(alpha.nnz() == 1);
    CHECK(alpha.values[0] == 1.0);
}

TEST_CASE("attention_matrix with zero encodings is uniform over each neighborhood") {
    const auto triple = make_pattern(8, 0.4, 7);
    const CsrMatrix alpha = attention_matrix(Matrix::zeros(8, 4), triple.pattern);
    for (std::size_t i = 0; i < 8; ++i) {
        const auto vals = alpha.row_vals(i);
        for (double v : vals) {
            CHECK(v == doctest::Approx(1.0 / static_cast<double>(vals.size())).epsilon(1e-12));
        }
    }
}

TEST_CASE("attention_matrix reproduces the two-node softmax split") {
    const CsrMatrix pattern =
        add_self_loops(csr_from_edges(2, 2, std::vector<Edge>{{0, 1}, {1, 0}}));
    const Matrix e = Matrix::from_rows({{1.0, 0.0}, {2.0, 0.0}});
    const CsrMatrix alpha = attention_matrix(e, pattern);
    // Row 0 logits: <e0,e0>=1, <e0,e1>=2 -> softmax [0.2689, 0.7311].
    CHECK(alpha.row_vals(0)[0] == doctest::Approx(0.2689414213699951).epsilon(1e-10));
    CHECK(alpha.row_vals(0)[1] == doctest::Approx(0.7310585786300049).epsilon(1e-10));
}

TEST_CASE("attention_matrix keeps the pattern's sparsity and row-normalizes") {
    const auto triple = make_pattern(12, 0.3, 8);
    const CsrMatrix alpha = attention_matrix(random_matrix(12, 6, 9), triple.pattern);
    CHECK(alpha.row_offsets == triple.pattern.row_offsets);
    CHECK(alpha.col_indices == triple.pattern.col_indices);
    for (std::size_t i = 0; i < 12; ++i) {
        double s = 0.0;
        for (double v : alpha.row_vals(i)) {
            CHECK(v > 0.0);
            s += v;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("attention_matrix requires self-loops so no row is empty") {
    const CsrMatrix bare = csr_from_edges(2, 2, std::vector<Edge>{{0, 1}});
    CHECK_THROWS_AS(attention_matrix(random_matrix(2, 2, 10), bare), ValueError);
}

TEST_CASE("single-head attention over isolated nodes is elu of the embedding") {
    const GesmDims dims{3, 4, 2, 1, 1};
    GesmParams params = test_params(dims, GesmVariant{true, true}, 11);
    const GraphOperators ops = build_graph_operators(5, {});
    const Matrix x = random_matrix(5, 3, 12, 0.0, 1.0);
    const Matrix h = attention_feature(x, params, ops);
    // alpha is the identity, so each head reduces to elu(z) = elu(elu(x w)).
    Matrix expected = gesm::testing::oracle_elu(gesm::testing::oracle_mm(x, params.w_heads[0]));
    expected = gesm::testing::oracle_elu(std::move(expected));
    CHECK(max_abs_diff(h, expected) < 1e-12);
}

TEST_CASE("step_mixture at s = 0 is the embedding itself") {
    const auto triple = make_pattern(6, 0.4, 13);
    const CsrMatrix hat = column_normalize(triple.pattern);
    const Matrix h = random_matrix(6, 3, 14);
    CHECK(step_mixture(h, hat, 0) == h);
}

TEST_CASE("step_mixture with the identity transition repeats the blocks") {
    std::vector<Edge> loops;
    for (std::uint32_t i = 0; i < 4; ++i) {
        loops.emplace_back(i, i);
    }
    const CsrMatrix eye = csr_from_edges(4, 4, loops);
    const Matrix h = random_matrix(4, 2, 15);
    const Matrix f = step_mixture(h, eye, 2);
    REQUIRE(f.cols == 6);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(f.at(i, j) == h.at(i, j));
            CHECK(f.at(i, 2 + j) == h.at(i, j));
            CHECK(f.at(i, 4 + j) == h.at(i, j));
        }
    }
}

TEST_CASE("step_mixture matches the hand-iterated two-node example") {
    const CsrMatrix hat =
        transition_matrix(csr_from_edges(2, 2, std::vector<Edge>{{0, 1}, {1, 0}}));
    const Matrix h = Matrix::from_rows({{2.0}, {0.0}});
    const Matrix f = step_mixture(h, hat, 2);
    CHECK(f == Matrix::from_rows({{2.0, 1.0, 1.0}, {0.0, 1.0, 1.0}}));
}

TEST_CASE("predict with zero weights is uniform and rows always sum to one") {
    const Matrix f_cat = random_matrix(5, 6, 16);
    const Matrix uniform = predict(f_cat, Matrix::zeros(6, 3), Matrix::zeros(1, 3), false);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(uniform.at(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        }
    }
    const Matrix out =
        predict(f_cat, random_matrix(6, 3, 17), random_matrix(1, 3, 18), false);
    for (std::size_t i = 0; i < 5; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            s += out.at(i, j);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("make_params shapes follow the dimension plan and reject bad configs") {
    const GesmDims dims{7, 8, 3, 2, 4};
    const GesmParams p = test_params(dims, GesmVariant{true, true}, 19);
    REQUIRE(p.w_heads.size() == 4);
    REQUIRE(p.a_heads.size() == 4);
    CHECK(p.w_heads[0].rows == 7);
    CHECK(p.w_heads[0].cols == 2);
    CHECK(p.a_heads[0].cols == 2);
    CHECK(p.w_pred.rows == 24); // (s+1)*h
    CHECK(p.w_pred.cols == 3);
    CHECK(p.b_pred == Matrix::zeros(1, 3));
    check_params(p);

    Rng rng(20);
    CHECK_THROWS_AS(make_params(GesmDims{7, 9, 3, 2, 4}, GesmVariant{true, true}, rng),
                    DimensionError); // heads must divide h
}

TEST_CASE("params round-trip through the binary file exactly") {
    const GesmDims dims{5, 6, 4, 3, 2};
    const GesmParams p = test_params(dims, GesmVariant{true, true}, 21);
    const std::string path = "/tmp/gesm_test_params.gesm";
    save_params(p, path);
    const GesmParams q = load_params(path);
    CHECK(p == q);
    std::remove(path.c_str());

    const GesmParams base = test_params(GesmDims{5, 6, 4, 3, 1}, GesmVariant{false, false}, 22);
    save_params(base, path);
    CHECK(load_params(path) == base);
    std::remove(path.c_str());
}

TEST_CASE("load_params rejects corrupt headers") {
    const std::string path = "/tmp/gesm_test_params_bad.gesm";
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        REQUIRE(f != nullptr);
        std::fputs("not a parameter file at all", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_params(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("full forward matches the dense oracle within 1e-10") {
    const std::size_t n = 9;
    const auto edges = random_symmetric_edges(n, 0.35, 23);
    const GraphOperators ops = build_graph_operators(n, edges);
    const Matrix adj01 = dense_adj(n, edges);
    const Matrix x = random_matrix(n, 5, 24);

    for (const bool use_attention : {false, true}) {
        const GesmDims dims{5, 6, 3, 2, use_attention ? std::size_t{2} : std::size_t{1}};
        const GesmParams params = test_params(dims, GesmVariant{use_attention, true}, 25);
        for (const bool multi_label : {false, true}) {
            const GesmEval got = gesm_eval(params, x, ops, multi_label);
            const auto want = gesm::testing::oracle_forward(x, adj01, params, multi_label);
            CHECK(max_abs_diff(got.output, want.output) < 1e-10);
            CHECK(max_abs_diff(got.reg_embedding, want.reg_embedding) < 1e-10);
        }
    }
}

TEST_CASE("outer-sum pooling also matches the dense oracle") {
    const std::size_t n = 7;
    const auto edges = random_symmetric_edges(n, 0.4, 26);
    const GraphOperators ops = build_graph_operators(n, edges);
    const GesmDims dims{4, 6, 2, 1, 3};
    const GesmParams params = test_params(dims, GesmVariant{true, true}, 27);
    const Matrix x = random_matrix(n, 4, 28);
    const GesmEval got = gesm_eval(params, x, ops, false, Tape::EdgePooling::OuterSum);
    const auto want = gesm::testing::oracle_forward(x, dense_adj(n, edges), params, false, true);
    CHECK(max_abs_diff(got.output, want.output) < 1e-10);
}

TEST_CASE("without steps or attention the model is a two-layer mlp") {
    const GraphOperators ops = build_graph_operators(6, random_symmetric_edges(6, 0.5, 29));
    const GesmDims dims{4, 5, 3, 0, 1};
    const GesmParams params = test_params(dims, GesmVariant{false, false}, 30);
    const Matrix x = random_matrix(6, 4, 31);
    const GesmEval got = gesm_eval(params, x, ops, false);

    Matrix logits = gesm::testing::oracle_mm(
        gesm::testing::oracle_elu(gesm::testing::oracle_mm(x, params.w_embed)), params.w_pred);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            logits.at(i, j) += params.b_pred.at(0, j);
        }
    }
    CHECK(max_abs_diff(got.output, gesm::testing::oracle_row_softmax(std::move(logits))) <
          1e-12);
}

TEST_CASE("forward is equivariant under node permutations") {
    const std::size_t n = 10;
    const auto edges = random_symmetric_edges(n, 0.3, 32);
    const GesmDims dims{4, 6, 3, 3, 2};
    const GesmParams params = test_params(dims, GesmVariant{true, true}, 33);
    const Matrix x = random_matrix(n, 4, 34);

    std::vector<std::uint32_t> pi(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        pi[i] = i;
    }
    Rng rng(35);
    rng.shuffle(pi);

    Matrix px(n, x.cols);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) {
            px.at(pi[i], j) = x.at(i, j);
        }
    }
    std::vector<Edge> pedges;
    pedges.reserve(edges.size());
    for (const Edge& e : edges) {
        pedges.emplace_back(pi[e.first], pi[e.second]);
    }

    const GesmEval plain = gesm_eval(params, x, build_graph_operators(n, edges), false);
    const GesmEval permuted = gesm_eval(params, px, build_graph_operators(n, pedges), false);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < plain.output.cols; ++j) {
            CHECK(plain.output.at(i, j) ==
                  doctest::Approx(permuted.output.at(pi[i], j)).epsilon(1e-9));
        }
    }
}

TEST_CASE("eval mode is deterministic and train mode without dropout matches it") {
    const std::size_t n = 8;
    const GraphOperators ops = build_graph_operators(n, random_symmetric_edges(n, 0.4, 36));
    const GesmDims dims{3, 4, 2, 2, 2};
    const GesmParams params = test_params(dims, GesmVariant{true, true}, 37);
    const Matrix x = random_matrix(n, 3, 38);

    const GesmEval once = gesm_eval(params, x, ops, false);
    const GesmEval twice = gesm_eval(params, x, ops, false);
    CHECK(once.output == twice.output);

    Tape tape;
    const GesmStage stage = stage_params(tape, params, false);
    Rng dropout_rng(39);
    const GesmForward fwd =
        gesm_forward(tape, stage, tape.leaf(x), ops, params, 0.0, dropout_rng, true, false);
    CHECK(max_abs_diff(tape.value(fwd.output), once.output) == 0.0);
}

TEST_CASE("training-mode dropout changes activations but keeps probabilities valid") {
    const std::size_t n = 8;
    const GraphOperators ops = build_graph_operators(n, random_symmetric_edges(n, 0.4, 40));
    const GesmDims dims{3, 4, 2, 2, 1};
    const GesmParams params = test_params(dims, GesmVariant{true, true}, 41);
    const Matrix x = random_matrix(n, 3, 42, 0.1, 1.0);

    Tape tape;
    const GesmStage stage = stage_params(tape, params, false);
    Rng dropout_rng(43);
    const GesmForward fwd =
        gesm_forward(tape, stage, tape.leaf(x), ops, params, 0.5, dropout_rng, true, false);
    const Matrix& out = tape.value(fwd.output);
    CHECK(max_abs_diff(out, gesm_eval(params, x, ops, false).output) > 1e-6);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < out.cols; ++j) {
            s += out.at(i, j);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("full pipeline gradients match finite differences") {
    const std::size_t n = 6;
    const auto edges = random_symmetric_edges(n, 0.5, 44);
    gesm::testing::ModelProblem prob;
    prob.ops = build_graph_operators(n, edges);
    prob.x = random_matrix(n, 3, 45);
    prob.labels = {0, 1, 1, 0, 1, 0};
    prob.mask = {1, 1, 0, 1, 0, 1};
    Rng rng(46);
    prob.batch = sample_triplets(prob.ops.adjacency, rng, 8);
    prob.beta = 0.7;
    prob.lambda = 0.05;

    SUBCASE("attention variant") {
        const GesmDims dims{3, 4, 2, 2, 2};
        const double rel =
            gesm::testing::model_gradcheck(test_params(dims, GesmVariant{true, true}, 47), prob);
        CHECK(rel < 1e-4);
    }
    SUBCASE("plain variant") {
        const GesmDims dims{3, 4, 2, 2, 1};
        const double rel = gesm::testing::model_gradcheck(
            test_params(dims, GesmVariant{false, false}, 48), prob);
        CHECK(rel < 1e-5);
    }
}

TEST_CASE("check_params rejects inconsistent variants and non-finite weights") {
    const GesmDims dims{3, 4, 2, 1, 2};
    GesmParams p = test_params(dims, GesmVariant{true, true}, 49);
    SUBCASE("attention params must not carry an embedding weight") {
        p.w_embed = random_matrix(3, 4, 50);
        CHECK_THROWS_AS(check_params(p), ValueError);
    }
    SUBCASE("non-finite weight") {
        p.w_heads[0].at(0, 0) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(check_params(p), NumericError);
    }
    SUBCASE("wrong prediction shape") {
        p.w_pred = random_matrix(3, 2, 51);
        CHECK_THROWS_AS(check_params(p), DimensionError);
    }
}
