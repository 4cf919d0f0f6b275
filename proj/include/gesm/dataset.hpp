#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gesm/csr.hpp"
#include "gesm/matrix.hpp"

namespace gesm {

/// In-memory node classification dataset. For undirected data the edge list
/// holds both directions of every edge; files store each undirected edge
/// once. Immutable after load apart from the split masks.
struct GraphDataset {
    std::size_t n = 0;
    std::size_t f = 0;
    std::size_t c = 0;
    bool multi_label = false;
    bool directed = false;
    Matrix features;                     // n x f
    std::vector<std::uint32_t> labels;   // n entries; empty in multi-label mode
    Matrix label_matrix;                 // n x c 0/1; empty in single-label mode
    std::vector<Edge> edges;             // canonical: sorted, deduplicated, no self-loops
    std::vector<std::uint8_t> train_mask;
    std::vector<std::uint8_t> val_mask;
    std::vector<std::uint8_t> test_mask;

    bool operator==(const GraphDataset&) const = default;
};

/// Structural checks: mask lengths and disjointness, label ranges, edge
/// ranges, symmetry when undirected. Throws on the first violation.
void validate_dataset(const GraphDataset& ds);

/// Number of stored edge records a file would hold (undirected edges counted
/// once); the in-memory list is twice this for undirected data.
std::size_t file_edge_count(const GraphDataset& ds);

/// One-line summary (node/edge/feature/class/split counts) for logs.
std::string describe(const GraphDataset& ds);

/// Reads either the binary container (magic "GESM") or its JSON twin,
/// sniffing the leading bytes. Edges are canonicalized: validated, reverse
/// directions added for undirected data, self-loops dropped, duplicates
/// merged.
GraphDataset load_dataset(const std::string& path);

/// Writes the binary container, or the JSON twin when the path ends in
/// ".json". load_dataset(save_dataset(ds)) reproduces ds field for field
/// (features pass through 32-bit storage in the binary form).
void save_dataset(const GraphDataset& ds, const std::string& path);

enum class SplitMode {
    Public,        // fixed planetoid-style: first k per class, next block val, tail block test
    PerClassCount, // k random nodes per class
    LabelRate,     // round(rate*n) nodes, stratified by class
};

struct SplitSpec {
    SplitMode mode = SplitMode::Public;
    std::size_t train_per_class = 20;
    double rate = 0.0; // LabelRate mode only
    std::size_t val_count = 500;
    std::size_t test_count = 1000;
    std::uint64_t seed = 0; // ignored by Public mode
};

struct SplitMasks {
    std::vector<std::uint8_t> train;
    std::vector<std::uint8_t> val;
    std::vector<std::uint8_t> test;
};

/// Disjoint train/val/test masks for a single-label dataset. Public mode is
/// deterministic; the random modes draw from a substream of spec.seed.
SplitMasks make_split(const GraphDataset& ds, const SplitSpec& spec);

void set_split(GraphDataset& ds, const SplitMasks& masks);

/// Two planted communities: labels are the community, features are one-hot
/// community indicators with additive Gaussian noise, and each node pair is
/// joined with probability p_in inside a community and p_out across. With
/// require_connected the draw is retried (bounded) until one component.
GraphDataset synth_two_cluster(std::size_t n_per_cluster, double p_in, double p_out,
                               std::uint64_t seed, double feature_noise = 0.1,
                               bool require_connected = true);

/// Text export: header "n dim", then one space-separated row per node with
/// 17 significant digits (exact double round trip).
void export_embeddings(const Matrix& z, const std::string& path);

/// Reads the export_embeddings format back; header must match the body.
Matrix read_embeddings(const std::string& path);

} // namespace gesm
