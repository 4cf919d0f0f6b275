#include "gesm/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include "json.hpp"

#include "gesm/error.hpp"
#include "gesm/rng.hpp"

namespace gesm {

namespace {

constexpr char kMagic[4] = {'G', 'E', 'S', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr int kConnectivityRetries = 32;

// ---- little-endian primitives (explicit so containers are portable) ----

void put_u8(std::ostream& out, std::uint8_t v) {
    out.put(static_cast<char>(v));
}

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.put(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void put_u64(std::ostream& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.put(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void put_f32(std::ostream& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

std::uint8_t get_u8(std::istream& in) {
    const int ch = in.get();
    if (ch == std::istream::traits_type::eof()) {
        throw SizeError("container truncated");
    }
    return static_cast<std::uint8_t>(ch);
}

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(get_u8(in)) << (8 * i);
    }
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(get_u8(in)) << (8 * i);
    }
    return v;
}

float get_f32(std::istream& in) {
    return std::bit_cast<float>(get_u32(in));
}

// Sorts, deduplicates, strips self-loops, and mirrors edges of undirected
// data. Endpoints must already be validated against n.
std::vector<Edge> canonicalize_edges(std::vector<Edge> edges, bool directed) {
    std::vector<Edge> out;
    out.reserve(directed ? edges.size() : edges.size() * 2);
    for (const Edge& e : edges) {
        if (e.first == e.second) {
            continue;
        }
        out.push_back(e);
        if (!directed) {
            out.emplace_back(e.second, e.first);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void check_edge_range(const std::vector<Edge>& edges, std::size_t n) {
    for (const Edge& e : edges) {
        if (e.first >= n || e.second >= n) {
            throw ValueError("edge (" + std::to_string(e.first) + ", " +
                             std::to_string(e.second) + ") endpoint out of range for " +
                             std::to_string(n) + " nodes");
        }
    }
}

void check_mask(const std::vector<std::uint8_t>& mask, std::size_t n, const char* name) {
    if (mask.size() != n) {
        throw SizeError(std::string(name) + " mask has " + std::to_string(mask.size()) +
                        " entries for " + std::to_string(n) + " nodes");
    }
    for (std::uint8_t v : mask) {
        if (v > 1) {
            throw ValueError(std::string(name) + " mask entries must be 0 or 1");
        }
    }
}

std::size_t mask_count(const std::vector<std::uint8_t>& mask) {
    std::size_t k = 0;
    for (std::uint8_t v : mask) {
        k += v;
    }
    return k;
}

// Per-class node lists, ascending ids, for single-label data.
std::vector<std::vector<std::uint32_t>> nodes_by_class(const GraphDataset& ds) {
    if (ds.multi_label) {
        throw ValueError("splits by class require single-label data");
    }
    std::vector<std::vector<std::uint32_t>> by_class(ds.c);
    for (std::size_t i = 0; i < ds.n; ++i) {
        by_class[ds.labels[i]].push_back(static_cast<std::uint32_t>(i));
    }
    return by_class;
}

// Draws val then test uniformly from the nodes outside the train mask.
void fill_val_test(const std::vector<std::uint8_t>& train, std::size_t val_count,
                   std::size_t test_count, Rng& rng, std::vector<std::uint8_t>& val,
                   std::vector<std::uint8_t>& test) {
    std::vector<std::uint32_t> pool;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (!train[i]) {
            pool.push_back(static_cast<std::uint32_t>(i));
        }
    }
    if (val_count + test_count > pool.size()) {
        throw ValueError("split infeasible: " + std::to_string(val_count + test_count) +
                         " val+test nodes requested but only " + std::to_string(pool.size()) +
                         " remain outside the training set");
    }
    const std::vector<std::uint32_t> picks = rng.sample_without_replacement(
        static_cast<std::uint32_t>(pool.size()),
        static_cast<std::uint32_t>(val_count + test_count));
    for (std::size_t j = 0; j < picks.size(); ++j) {
        (j < val_count ? val : test)[pool[picks[j]]] = 1;
    }
}

} // namespace

void validate_dataset(const GraphDataset& ds) {
    if (ds.n == 0) {
        throw ValueError("dataset has no nodes");
    }
    if (ds.f == 0 || ds.c == 0) {
        throw ValueError("dataset needs at least one feature and one class");
    }
    if (ds.features.rows != ds.n || ds.features.cols != ds.f) {
        throw DimensionError("feature matrix is (" + std::to_string(ds.features.rows) + ", " +
                             std::to_string(ds.features.cols) + "), expected (" +
                             std::to_string(ds.n) + ", " + std::to_string(ds.f) + ")");
    }
    if (ds.multi_label) {
        if (!ds.labels.empty()) {
            throw ValueError("multi-label dataset must not carry class indices");
        }
        if (ds.label_matrix.rows != ds.n || ds.label_matrix.cols != ds.c) {
            throw DimensionError("label matrix shape mismatch");
        }
        for (double v : ds.label_matrix.data) {
            if (v != 0.0 && v != 1.0) {
                throw ValueError("label matrix entries must be 0 or 1");
            }
        }
    } else {
        if (ds.labels.size() != ds.n) {
            throw SizeError("have " + std::to_string(ds.labels.size()) + " labels for " +
                            std::to_string(ds.n) + " nodes");
        }
        for (std::size_t i = 0; i < ds.n; ++i) {
            if (ds.labels[i] >= ds.c) {
                throw ValueError("node " + std::to_string(i) + " has label " +
                                 std::to_string(ds.labels[i]) + " but only " +
                                 std::to_string(ds.c) + " classes exist");
            }
        }
        if (!ds.label_matrix.empty()) {
            throw ValueError("single-label dataset must not carry a label matrix");
        }
    }
    check_edge_range(ds.edges, ds.n);
    for (std::size_t k = 0; k + 1 < ds.edges.size(); ++k) {
        if (!(ds.edges[k] < ds.edges[k + 1])) {
            throw ValueError("edge list is not sorted and deduplicated");
        }
    }
    for (const Edge& e : ds.edges) {
        if (e.first == e.second) {
            throw ValueError("self-loop stored at node " + std::to_string(e.first));
        }
        if (!ds.directed &&
            !std::binary_search(ds.edges.begin(), ds.edges.end(), Edge{e.second, e.first})) {
            throw ValueError("undirected dataset is missing the reverse of (" +
                             std::to_string(e.first) + ", " + std::to_string(e.second) + ")");
        }
    }
    check_mask(ds.train_mask, ds.n, "train");
    check_mask(ds.val_mask, ds.n, "val");
    check_mask(ds.test_mask, ds.n, "test");
    for (std::size_t i = 0; i < ds.n; ++i) {
        if (ds.train_mask[i] + ds.val_mask[i] + ds.test_mask[i] > 1) {
            throw ValueError("node " + std::to_string(i) + " appears in more than one split");
        }
    }
}

std::size_t file_edge_count(const GraphDataset& ds) {
    if (ds.directed) {
        return ds.edges.size();
    }
    std::size_t k = 0;
    for (const Edge& e : ds.edges) {
        k += e.first < e.second;
    }
    return k;
}

std::string describe(const GraphDataset& ds) {
    std::ostringstream out;
    out << "n=" << ds.n << " f=" << ds.f << " c=" << ds.c << " edges=" << file_edge_count(ds)
        << (ds.directed ? " (directed)" : " (undirected)")
        << (ds.multi_label ? " multi-label" : "") << " train=" << mask_count(ds.train_mask)
        << " val=" << mask_count(ds.val_mask) << " test=" << mask_count(ds.test_mask);
    return out.str();
}

namespace {

GraphDataset load_binary(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || !std::equal(magic, magic + 4, kMagic)) {
        throw FormatError("bad magic bytes; not a dataset container");
    }
    const std::uint32_t version = get_u32(in);
    if (version != kVersion) {
        throw FormatError("unsupported container version " + std::to_string(version));
    }
    const std::uint8_t flags = get_u8(in);
    if (flags > 3) {
        throw FormatError("unknown container flags " + std::to_string(flags));
    }
    GraphDataset ds;
    ds.multi_label = (flags & 1) != 0;
    ds.directed = (flags & 2) != 0;
    ds.n = static_cast<std::size_t>(get_u64(in));
    ds.f = static_cast<std::size_t>(get_u64(in));
    ds.c = static_cast<std::size_t>(get_u64(in));
    const std::uint64_t e = get_u64(in);
    if (ds.n == 0) {
        throw ValueError("dataset has no nodes");
    }
    // Node ids travel as u32, so these bounds also keep a corrupt header from
    // requesting an absurd allocation before the reads below hit EOF.
    if (ds.n > 0xffffffffull || ds.f > 0xffffffffull || ds.c > 0xffffffffull ||
        e > 0xffffffffull) {
        throw FormatError("container header sizes exceed the 32-bit index space");
    }
    ds.features = Matrix(ds.n, ds.f);
    for (double& v : ds.features.data) {
        v = static_cast<double>(get_f32(in));
    }
    if (ds.multi_label) {
        ds.label_matrix = Matrix(ds.n, ds.c);
        for (double& v : ds.label_matrix.data) {
            v = static_cast<double>(get_u8(in));
        }
    } else {
        ds.labels.resize(ds.n);
        for (std::uint32_t& v : ds.labels) {
            v = get_u32(in);
        }
    }
    std::vector<Edge> raw;
    raw.reserve(e);
    for (std::uint64_t k = 0; k < e; ++k) {
        const std::uint32_t u = get_u32(in);
        const std::uint32_t v = get_u32(in);
        raw.emplace_back(u, v);
    }
    check_edge_range(raw, ds.n);
    ds.edges = canonicalize_edges(std::move(raw), ds.directed);
    for (auto* mask : {&ds.train_mask, &ds.val_mask, &ds.test_mask}) {
        mask->resize(ds.n);
        for (std::uint8_t& v : *mask) {
            v = get_u8(in);
        }
    }
    return ds;
}

GraphDataset load_json(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("invalid dataset JSON: ") + ex.what());
    }
    try {
        GraphDataset ds;
        ds.multi_label = j.value("multi_label", false);
        ds.directed = j.value("directed", false);
        ds.n = j.at("n").get<std::size_t>();
        ds.f = j.at("f").get<std::size_t>();
        ds.c = j.at("c").get<std::size_t>();
        if (ds.n == 0) {
            throw ValueError("dataset has no nodes");
        }
        const auto& feats = j.at("features");
        if (feats.size() != ds.n) {
            throw SizeError("features array has " + std::to_string(feats.size()) +
                            " rows for " + std::to_string(ds.n) + " nodes");
        }
        ds.features = Matrix(ds.n, ds.f);
        for (std::size_t i = 0; i < ds.n; ++i) {
            if (feats[i].size() != ds.f) {
                throw SizeError("feature row " + std::to_string(i) + " has " +
                                std::to_string(feats[i].size()) + " entries, expected " +
                                std::to_string(ds.f));
            }
            for (std::size_t k = 0; k < ds.f; ++k) {
                ds.features.at(i, k) = feats[i][k].get<double>();
            }
        }
        const auto& labels = j.at("labels");
        if (labels.size() != ds.n) {
            throw SizeError("labels array has " + std::to_string(labels.size()) +
                            " entries for " + std::to_string(ds.n) + " nodes");
        }
        if (ds.multi_label) {
            ds.label_matrix = Matrix(ds.n, ds.c);
            for (std::size_t i = 0; i < ds.n; ++i) {
                if (labels[i].size() != ds.c) {
                    throw SizeError("label row " + std::to_string(i) + " has wrong width");
                }
                for (std::size_t k = 0; k < ds.c; ++k) {
                    ds.label_matrix.at(i, k) = labels[i][k].get<double>();
                }
            }
        } else {
            ds.labels.reserve(ds.n);
            for (const auto& v : labels) {
                ds.labels.push_back(v.get<std::uint32_t>());
            }
        }
        std::vector<Edge> raw;
        for (const auto& pair : j.at("edges")) {
            if (pair.size() != 2) {
                throw FormatError("edges must be [src, dst] pairs");
            }
            raw.emplace_back(pair[0].get<std::uint32_t>(), pair[1].get<std::uint32_t>());
        }
        check_edge_range(raw, ds.n);
        ds.edges = canonicalize_edges(std::move(raw), ds.directed);
        for (auto [key, mask] : {std::pair{"train_mask", &ds.train_mask},
                                 std::pair{"val_mask", &ds.val_mask},
                                 std::pair{"test_mask", &ds.test_mask}}) {
            mask->assign(ds.n, 0);
            if (j.contains(key)) {
                const auto& arr = j.at(key);
                if (arr.size() != ds.n) {
                    throw SizeError(std::string(key) + " has wrong length");
                }
                for (std::size_t i = 0; i < ds.n; ++i) {
                    (*mask)[i] = arr[i].get<std::uint8_t>();
                }
            }
        }
        return ds;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("invalid dataset JSON: ") + ex.what());
    }
}

} // namespace

GraphDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    const int first = in.peek();
    GraphDataset ds;
    if (first == 'G') {
        ds = load_binary(in);
    } else if (first == '{') {
        ds = load_json(in);
    } else {
        throw FormatError(path + " is neither a binary container nor JSON");
    }
    validate_dataset(ds);
    return ds;
}

void save_dataset(const GraphDataset& ds, const std::string& path) {
    validate_dataset(ds);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    if (path.size() >= 5 && path.ends_with(".json")) {
        nlohmann::json j;
        j["version"] = kVersion;
        j["multi_label"] = ds.multi_label;
        j["directed"] = ds.directed;
        j["n"] = ds.n;
        j["f"] = ds.f;
        j["c"] = ds.c;
        auto feats = nlohmann::json::array();
        for (std::size_t i = 0; i < ds.n; ++i) {
            auto row = nlohmann::json::array();
            for (std::size_t k = 0; k < ds.f; ++k) {
                row.push_back(ds.features.at(i, k));
            }
            feats.push_back(std::move(row));
        }
        j["features"] = std::move(feats);
        if (ds.multi_label) {
            auto rows = nlohmann::json::array();
            for (std::size_t i = 0; i < ds.n; ++i) {
                auto row = nlohmann::json::array();
                for (std::size_t k = 0; k < ds.c; ++k) {
                    row.push_back(static_cast<int>(ds.label_matrix.at(i, k)));
                }
                rows.push_back(std::move(row));
            }
            j["labels"] = std::move(rows);
        } else {
            j["labels"] = ds.labels;
        }
        auto edges = nlohmann::json::array();
        for (const Edge& e : ds.edges) {
            if (ds.directed || e.first < e.second) {
                edges.push_back({e.first, e.second});
            }
        }
        j["edges"] = std::move(edges);
        j["train_mask"] = ds.train_mask;
        j["val_mask"] = ds.val_mask;
        j["test_mask"] = ds.test_mask;
        out << j.dump(2) << '\n';
    } else {
        out.write(kMagic, 4);
        put_u32(out, kVersion);
        put_u8(out, static_cast<std::uint8_t>((ds.multi_label ? 1 : 0) | (ds.directed ? 2 : 0)));
        put_u64(out, ds.n);
        put_u64(out, ds.f);
        put_u64(out, ds.c);
        put_u64(out, file_edge_count(ds));
        for (double v : ds.features.data) {
            put_f32(out, static_cast<float>(v));
        }
        if (ds.multi_label) {
            for (double v : ds.label_matrix.data) {
                put_u8(out, static_cast<std::uint8_t>(v));
            }
        } else {
            for (std::uint32_t v : ds.labels) {
                put_u32(out, v);
            }
        }
        for (const Edge& e : ds.edges) {
            if (ds.directed || e.first < e.second) {
                put_u32(out, e.first);
                put_u32(out, e.second);
            }
        }
        for (const auto* mask : {&ds.train_mask, &ds.val_mask, &ds.test_mask}) {
            for (std::uint8_t v : *mask) {
                put_u8(out, v);
            }
        }
    }
    if (!out) {
        throw IoError("write to " + path + " failed");
    }
}

SplitMasks make_split(const GraphDataset& ds, const SplitSpec& spec) {
    const auto by_class = nodes_by_class(ds);
    SplitMasks masks;
    masks.train.assign(ds.n, 0);
    masks.val.assign(ds.n, 0);
    masks.test.assign(ds.n, 0);

    if (spec.mode == SplitMode::Public) {
        for (std::size_t cls = 0; cls < ds.c; ++cls) {
            if (by_class[cls].size() < spec.train_per_class) {
                throw ValueError("split infeasible: class " + std::to_string(cls) + " has " +
                                 std::to_string(by_class[cls].size()) + " nodes, need " +
                                 std::to_string(spec.train_per_class));
            }
            for (std::size_t k = 0; k < spec.train_per_class; ++k) {
                masks.train[by_class[cls][k]] = 1;
            }
        }
        std::size_t placed = 0;
        for (std::size_t i = 0; i < ds.n && placed < spec.val_count; ++i) {
            if (!masks.train[i]) {
                masks.val[i] = 1;
                ++placed;
            }
        }
        if (placed < spec.val_count) {
            throw ValueError("split infeasible: not enough nodes for the validation block");
        }
        if (spec.test_count > ds.n) {
            throw ValueError("split infeasible: test block larger than the graph");
        }
        for (std::size_t i = ds.n - spec.test_count; i < ds.n; ++i) {
            if (masks.train[i] || masks.val[i]) {
                throw ValueError("split infeasible: test block overlaps train/val");
            }
            masks.test[i] = 1;
        }
        return masks;
    }

    Rng rng = Rng::substream(spec.seed, "splits");
    std::vector<std::size_t> quota(ds.c, 0);
    if (spec.mode == SplitMode::PerClassCount) {
        quota.assign(ds.c, spec.train_per_class);
    } else {
        if (!(spec.rate > 0.0 && spec.rate <= 1.0)) {
            throw ValueError("label rate must lie in (0, 1], got " + std::to_string(spec.rate));
        }
        const auto want = static_cast<std::size_t>(
            std::llround(spec.rate * static_cast<double>(ds.n)));
        if (want == 0) {
            throw ValueError("split infeasible: label rate selects zero nodes");
        }
        // Largest-remainder apportionment of `want` across classes.
        std::size_t assigned = 0;
        std::vector<std::pair<std::size_t, std::size_t>> rem; // (remainder, class)
        for (std::size_t cls = 0; cls < ds.c; ++cls) {
            quota[cls] = want * by_class[cls].size() / ds.n;
            assigned += quota[cls];
            rem.emplace_back(want * by_class[cls].size() % ds.n, cls);
        }
        std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        for (std::size_t k = 0; assigned < want; ++k) {
            quota[rem[k % rem.size()].second] += 1;
            ++assigned;
        }
    }
    for (std::size_t cls = 0; cls < ds.c; ++cls) {
        if (quota[cls] > by_class[cls].size()) {
            throw ValueError("split infeasible: class " + std::to_string(cls) + " has " +
                             std::to_string(by_class[cls].size()) + " nodes, need " +
                             std::to_string(quota[cls]));
        }
        const auto picks = rng.sample_without_replacement(
            static_cast<std::uint32_t>(by_class[cls].size()),
            static_cast<std::uint32_t>(quota[cls]));
        for (std::uint32_t p : picks) {
            masks.train[by_class[cls][p]] = 1;
        }
    }
    fill_val_test(masks.train, spec.val_count, spec.test_count, rng, masks.val, masks.test);
    return masks;
}

void set_split(GraphDataset& ds, const SplitMasks& masks) {
    ds.train_mask = masks.train;
    ds.val_mask = masks.val;
    ds.test_mask = masks.test;
    validate_dataset(ds);
}

GraphDataset synth_two_cluster(std::size_t n_per_cluster, double p_in, double p_out,
                               std::uint64_t seed, double feature_noise,
                               bool require_connected) {
    if (n_per_cluster == 0) {
        throw ValueError("synth_two_cluster: clusters must be nonempty");
    }
    if (!(p_out >= 0.0 && p_out < p_in && p_in <= 1.0)) {
        throw ValueError("synth_two_cluster: need 0 <= p_out < p_in <= 1");
    }
    const std::size_t n = 2 * n_per_cluster;
    Rng rng = Rng::substream(seed, "synth");
    for (int attempt = 0; attempt < kConnectivityRetries; ++attempt) {
        std::vector<Edge> edges;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const bool same = (i < n_per_cluster) == (j < n_per_cluster);
                if (rng.bernoulli(same ? p_in : p_out)) {
                    edges.emplace_back(static_cast<std::uint32_t>(i),
                                       static_cast<std::uint32_t>(j));
                }
            }
        }
        GraphDataset ds;
        ds.n = n;
        ds.f = 2;
        ds.c = 2;
        ds.directed = false;
        ds.edges = canonicalize_edges(std::move(edges), false);
        if (require_connected) {
            const CsrMatrix adj = csr_from_edges(n, n, ds.edges);
            std::vector<std::uint8_t> seen(n, 0);
            std::vector<std::uint32_t> queue{0};
            seen[0] = 1;
            std::size_t reached = 1;
            while (!queue.empty()) {
                const std::uint32_t u = queue.back();
                queue.pop_back();
                for (std::uint32_t v : adj.row_cols(u)) {
                    if (!seen[v]) {
                        seen[v] = 1;
                        ++reached;
                        queue.push_back(v);
                    }
                }
            }
            if (reached != n) {
                continue;
            }
        }
        ds.features = Matrix(n, 2);
        ds.labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t community = i < n_per_cluster ? 0 : 1;
            ds.labels[i] = static_cast<std::uint32_t>(community);
            for (std::size_t k = 0; k < 2; ++k) {
                ds.features.at(i, k) =
                    (k == community ? 1.0 : 0.0) + feature_noise * rng.normal();
            }
        }
        ds.train_mask.assign(n, 0);
        ds.val_mask.assign(n, 0);
        ds.test_mask.assign(n, 0);
        validate_dataset(ds);
        return ds;
    }
    throw ValueError("synth_two_cluster: no connected draw in " +
                     std::to_string(kConnectivityRetries) + " attempts");
}

void export_embeddings(const Matrix& z, const std::string& path) {
    if (!all_finite(z)) {
        throw NumericError("embeddings contain non-finite values");
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    out << z.rows << ' ' << z.cols << '\n';
    char buf[64];
    for (std::size_t i = 0; i < z.rows; ++i) {
        for (std::size_t j = 0; j < z.cols; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", z.at(i, j));
            out << (j ? " " : "") << buf;
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("write to " + path + " failed");
    }
}

Matrix read_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::size_t n = 0;
    std::size_t dim = 0;
    if (!(in >> n >> dim)) {
        throw FormatError("embedding file " + path + " has a malformed header");
    }
    Matrix z(n, dim);
    for (double& v : z.data) {
        if (!(in >> v)) {
            throw SizeError("embedding file " + path + " ends before the header's " +
                            std::to_string(n) + "x" + std::to_string(dim) + " values");
        }
    }
    double extra;
    if (in >> extra) {
        throw FormatError("embedding file " + path + " has data past the declared shape");
    }
    return z;
}

} // namespace gesm
