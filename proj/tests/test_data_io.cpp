#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "gesm/dataset.hpp"
#include "gesm/error.hpp"
#include "gesm/rng.hpp"

#include "support/helpers.hpp"

using namespace gesm;
using gesm::testing::random_matrix;

namespace {

// Small undirected single-label dataset with every field populated.
GraphDataset sample_dataset() {
    GraphDataset ds;
    ds.n = 6;
    ds.f = 3;
    ds.c = 2;
    ds.features = random_matrix(6, 3, 17);
    ds.labels = {0, 0, 1, 1, 0, 1};
    ds.edges = {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 3}, {3, 2}, {3, 4}, {4, 3}, {4, 5}, {5, 4}};
    ds.train_mask = {1, 0, 1, 0, 0, 0};
    ds.val_mask = {0, 1, 0, 1, 0, 0};
    ds.test_mask = {0, 0, 0, 0, 1, 1};
    return ds;
}

struct TempPath {
    std::string path;
    explicit TempPath(std::string p) : path(std::move(p)) {}
    ~TempPath() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("binary container round-trips field for field") {
    GraphDataset ds = sample_dataset();
    // Binary features are stored in 32 bits; use exactly representable values.
    for (double& v : ds.features.data) {
        v = static_cast<double>(static_cast<float>(v));
    }
    const TempPath tmp("/tmp/gesm_test_ds.gesm");
    save_dataset(ds, tmp.path);
    const GraphDataset back = load_dataset(tmp.path);
    CHECK(back == ds);
}

TEST_CASE("json twin round-trips exactly") {
    const GraphDataset ds = sample_dataset();
    const TempPath tmp("/tmp/gesm_test_ds.json");
    save_dataset(ds, tmp.path);
    const GraphDataset back = load_dataset(tmp.path);
    CHECK(back == ds);
}

TEST_CASE("multi-label datasets carry a label matrix through both formats") {
    GraphDataset ds = sample_dataset();
    ds.multi_label = true;
    ds.labels.clear();
    ds.label_matrix = Matrix::zeros(6, 2);
    for (std::size_t i = 0; i < 6; ++i) {
        ds.label_matrix.at(i, i % 2) = 1.0;
    }
    ds.label_matrix.at(0, 1) = 1.0; // genuinely multi-labeled node
    for (double& v : ds.features.data) {
        v = static_cast<double>(static_cast<float>(v));
    }
    for (const char* name : {"/tmp/gesm_test_ml.gesm", "/tmp/gesm_test_ml.json"}) {
        const TempPath tmp(name);
        save_dataset(ds, tmp.path);
        CHECK(load_dataset(tmp.path) == ds);
    }
}

TEST_CASE("loading symmetrizes undirected edge files") {
    const GraphDataset ds = sample_dataset();
    const TempPath tmp("/tmp/gesm_test_sym.gesm");
    save_dataset(ds, tmp.path);
    CHECK(file_edge_count(ds) == 5);
    const GraphDataset back = load_dataset(tmp.path);
    std::set<Edge> have(back.edges.begin(), back.edges.end());
    for (const Edge& e : back.edges) {
        CHECK(have.count({e.second, e.first}) == 1);
    }
}

TEST_CASE("validate_dataset names each failure mode distinctly") {
    SUBCASE("no nodes") {
        GraphDataset ds;
        CHECK_THROWS_AS(validate_dataset(ds), ValueError);
    }
    SUBCASE("label out of range") {
        GraphDataset ds = sample_dataset();
        ds.labels[2] = 9;
        CHECK_THROWS_AS(validate_dataset(ds), ValueError);
    }
    SUBCASE("self loop") {
        GraphDataset ds = sample_dataset();
        ds.edges.push_back({2, 2});
        CHECK_THROWS_AS(validate_dataset(ds), ValueError);
    }
    SUBCASE("missing reverse direction") {
        GraphDataset ds = sample_dataset();
        ds.edges.push_back({0, 5});
        CHECK_THROWS_AS(validate_dataset(ds), ValueError);
    }
    SUBCASE("overlapping masks") {
        GraphDataset ds = sample_dataset();
        ds.val_mask[0] = 1;
        CHECK_THROWS_AS(validate_dataset(ds), ValueError);
    }
    SUBCASE("mask length mismatch") {
        GraphDataset ds = sample_dataset();
        ds.train_mask.pop_back();
        CHECK_THROWS_AS(validate_dataset(ds), SizeError);
    }
    SUBCASE("feature shape mismatch") {
        GraphDataset ds = sample_dataset();
        ds.features = random_matrix(6, 4, 1);
        CHECK_THROWS_AS(validate_dataset(ds), DimensionError);
    }
    SUBCASE("edge endpoint out of range") {
        GraphDataset ds = sample_dataset();
        ds.edges.push_back({0, 19});
        ds.edges.push_back({19, 0});
        CHECK_THROWS_AS(validate_dataset(ds), ValueError);
    }
}

TEST_CASE("malformed files raise format errors") {
    const TempPath tmp("/tmp/gesm_test_bad.gesm");
    {
        std::ofstream out(tmp.path, std::ios::binary);
        out << "GARBAGE THAT IS NOT A CONTAINER";
    }
    CHECK_THROWS_AS(load_dataset(tmp.path), FormatError);

    const TempPath tmp2("/tmp/gesm_test_bad.json");
    {
        std::ofstream out(tmp2.path);
        out << "{\"n\": 3"; // truncated
    }
    CHECK_THROWS_AS(load_dataset(tmp2.path), FormatError);

    CHECK_THROWS_AS(load_dataset("/tmp/gesm_no_such_file.gesm"), IoError);
}

TEST_CASE("truncated binary payload is rejected") {
    const GraphDataset ds = sample_dataset();
    const TempPath full("/tmp/gesm_test_full.gesm");
    save_dataset(ds, full.path);
    const auto size = std::filesystem::file_size(full.path);
    const TempPath cut("/tmp/gesm_test_cut.gesm");
    {
        std::ifstream in(full.path, std::ios::binary);
        std::vector<char> bytes(static_cast<std::size_t>(size) - 7);
        in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        std::ofstream out(cut.path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_dataset(cut.path), SizeError);
}

TEST_CASE("public split takes the first labeled nodes per class then fixed blocks") {
    GraphDataset ds;
    ds.n = 40;
    ds.f = 2;
    ds.c = 2;
    ds.features = random_matrix(40, 2, 2);
    ds.labels.resize(40);
    for (std::size_t i = 0; i < 40; ++i) {
        ds.labels[i] = static_cast<std::uint32_t>(i % 2);
    }
    ds.train_mask.assign(40, 0);
    ds.val_mask.assign(40, 0);
    ds.test_mask.assign(40, 0);

    SplitSpec spec;
    spec.mode = SplitMode::Public;
    spec.train_per_class = 3;
    spec.val_count = 10;
    spec.test_count = 12;
    const SplitMasks masks = make_split(ds, spec);

    // First 3 of each class in ascending node order: 0..5 are alternating.
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(masks.train[i] == 1);
    }
    std::size_t train_count = 0;
    std::size_t val_count = 0;
    std::size_t test_count = 0;
    for (std::size_t i = 0; i < 40; ++i) {
        train_count += masks.train[i];
        val_count += masks.val[i];
        test_count += masks.test[i];
        CHECK(masks.train[i] + masks.val[i] + masks.test[i] <= 1);
    }
    CHECK(train_count == 6);
    CHECK(val_count == 10);
    // Validation picks the next unlabeled nodes in ascending order: 6..15.
    for (std::size_t i = 6; i < 16; ++i) {
        CHECK(masks.val[i] == 1);
    }
    CHECK(test_count == 12);
    // Test is the tail block.
    for (std::size_t i = 28; i < 40; ++i) {
        CHECK(masks.test[i] == 1);
    }
}

TEST_CASE("public split rejects infeasible counts") {
    GraphDataset ds;
    ds.n = 10;
    ds.f = 1;
    ds.c = 2;
    ds.features = random_matrix(10, 1, 3);
    ds.labels.assign(10, 0);
    for (std::size_t i = 0; i < 5; ++i) {
        ds.labels[i] = 1;
    }
    ds.train_mask.assign(10, 0);
    ds.val_mask.assign(10, 0);
    ds.test_mask.assign(10, 0);
    SplitSpec spec;
    spec.mode = SplitMode::Public;
    spec.train_per_class = 2;
    spec.val_count = 4;
    spec.test_count = 4; // 4 + 4 + 4 > 10: blocks overlap
    CHECK_THROWS_AS(make_split(ds, spec), ValueError);
}

TEST_CASE("per-class split draws the requested count from every class") {
    GraphDataset ds;
    ds.n = 60;
    ds.f = 2;
    ds.c = 3;
    ds.features = random_matrix(60, 2, 4);
    ds.labels.resize(60);
    for (std::size_t i = 0; i < 60; ++i) {
        ds.labels[i] = static_cast<std::uint32_t>(i % 3);
    }
    ds.train_mask.assign(60, 0);
    ds.val_mask.assign(60, 0);
    ds.test_mask.assign(60, 0);

    SplitSpec spec;
    spec.mode = SplitMode::PerClassCount;
    spec.train_per_class = 4;
    spec.val_count = 9;
    spec.test_count = 15;
    spec.seed = 5;
    const SplitMasks masks = make_split(ds, spec);
    std::vector<std::size_t> per_class(3, 0);
    for (std::size_t i = 0; i < 60; ++i) {
        if (masks.train[i]) {
            ++per_class[ds.labels[i]];
        }
    }
    CHECK(per_class == std::vector<std::size_t>{4, 4, 4});

    // Same seed reproduces; a different seed moves the draw.
    const SplitMasks again = make_split(ds, spec);
    CHECK(again.train == masks.train);
    CHECK(again.val == masks.val);
    CHECK(again.test == masks.test);
    spec.seed = 6;
    CHECK(make_split(ds, spec).train != masks.train);
}

TEST_CASE("label-rate split rounds the rate and stratifies by class") {
    GraphDataset ds;
    ds.n = 100;
    ds.f = 2;
    ds.c = 4;
    ds.features = random_matrix(100, 2, 7);
    ds.labels.resize(100);
    for (std::size_t i = 0; i < 100; ++i) {
        ds.labels[i] = static_cast<std::uint32_t>(i % 4);
    }
    ds.train_mask.assign(100, 0);
    ds.val_mask.assign(100, 0);
    ds.test_mask.assign(100, 0);

    SplitSpec spec;
    spec.mode = SplitMode::LabelRate;
    spec.rate = 0.08; // 8 nodes, 2 per class under stratification
    spec.val_count = 20;
    spec.test_count = 30;
    spec.seed = 8;
    const SplitMasks masks = make_split(ds, spec);
    std::vector<std::size_t> per_class(4, 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        if (masks.train[i]) {
            ++per_class[ds.labels[i]];
            ++total;
        }
    }
    CHECK(total == 8);
    CHECK(per_class == std::vector<std::size_t>{2, 2, 2, 2});
}

TEST_CASE("label-rate split at one percent of 2708 nodes trains on 27") {
    GraphDataset ds;
    ds.n = 2708;
    ds.f = 1;
    ds.c = 7;
    ds.features = Matrix::zeros(2708, 1);
    ds.labels.resize(2708);
    for (std::size_t i = 0; i < 2708; ++i) {
        ds.labels[i] = static_cast<std::uint32_t>(i % 7);
    }
    ds.train_mask.assign(2708, 0);
    ds.val_mask.assign(2708, 0);
    ds.test_mask.assign(2708, 0);
    SplitSpec spec;
    spec.mode = SplitMode::LabelRate;
    spec.rate = 0.01;
    spec.seed = 9;
    const SplitMasks masks = make_split(ds, spec);
    std::size_t total = 0;
    for (std::uint8_t b : masks.train) {
        total += b;
    }
    CHECK(total == 27);
}

TEST_CASE("synthetic two-cluster graphs are deterministic and well-formed") {
    const GraphDataset a = synth_two_cluster(25, 0.2, 0.02, 11);
    const GraphDataset b = synth_two_cluster(25, 0.2, 0.02, 11);
    CHECK(a == b);
    CHECK(a.n == 50);
    CHECK(a.c == 2);
    validate_dataset(a);
    for (std::size_t i = 0; i < a.n; ++i) {
        CHECK(a.labels[i] == (i < 25 ? 0 : 1));
    }
    const GraphDataset c = synth_two_cluster(25, 0.2, 0.02, 12);
    CHECK(c.edges != a.edges);
}

TEST_CASE("disconnected synthetic draws are allowed only when requested") {
    CHECK_THROWS_AS(synth_two_cluster(10, 1.0, 0.0, 13, 0.1, true), ValueError);
    const GraphDataset ds = synth_two_cluster(10, 1.0, 0.0, 13, 0.0, false);
    CHECK(ds.n == 20);
    // p_in=1, p_out=0: each community is a clique and there are no cross edges.
    CHECK(ds.edges.size() == 2 * (10 * 9)); // both directions of 2*C(10,2)
    CHECK(synth_two_cluster(10, 1.0, 0.0, 13, 0.0, false) == ds);
}

TEST_CASE("synth_two_cluster validates its probabilities") {
    CHECK_THROWS_AS(synth_two_cluster(10, 0.05, 0.5, 14), ValueError);
    CHECK_THROWS_AS(synth_two_cluster(10, 1.2, 0.0, 14), ValueError);
    CHECK_THROWS_AS(synth_two_cluster(0, 0.5, 0.1, 14), ValueError);
}

TEST_CASE("embeddings export and read back exactly") {
    const Matrix z = random_matrix(7, 3, 15);
    const TempPath tmp("/tmp/gesm_test_emb.txt");
    export_embeddings(z, tmp.path);
    const Matrix back = read_embeddings(tmp.path);
    CHECK(back == z);

    std::ifstream in(tmp.path);
    std::size_t n = 0;
    std::size_t d = 0;
    in >> n >> d;
    CHECK(n == 7);
    CHECK(d == 3);
}

TEST_CASE("embedding export refuses non-finite values") {
    Matrix z = random_matrix(2, 2, 16);
    z.at(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(export_embeddings(z, "/tmp/gesm_test_emb_bad.txt"), NumericError);
}

TEST_CASE("embedding read-back rejects a header that disagrees with the body") {
    const TempPath tmp("/tmp/gesm_test_emb_hdr.txt");
    {
        std::ofstream out(tmp.path);
        out << "3 2\n1.0 2.0\n3.0 4.0\n"; // header claims 3 rows, body has 2
    }
    CHECK_THROWS_AS(read_embeddings(tmp.path), SizeError);

    const TempPath tmp2("/tmp/gesm_test_emb_trail.txt");
    {
        std::ofstream out(tmp2.path);
        out << "1 2\n1.0 2.0\n9.0\n";
    }
    CHECK_THROWS_AS(read_embeddings(tmp2.path), FormatError);
}

TEST_CASE("describe reports the headline counts") {
    const GraphDataset ds = sample_dataset();
    const std::string line = describe(ds);
    CHECK(line.find("n=6") != std::string::npos);
    CHECK(line.find("f=3") != std::string::npos);
    CHECK(line.find("c=2") != std::string::npos);
    CHECK(line.find("edges=5") != std::string::npos);
}
