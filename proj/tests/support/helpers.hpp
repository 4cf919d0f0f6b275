#pragma once

#include <cstdint>
#include <vector>

#include "gesm/csr.hpp"
#include "gesm/matrix.hpp"
#include "gesm/rng.hpp"

namespace gesm::testing {

/// Erdos-Renyi style undirected graph, returned as directed entry pairs.
inline std::vector<Edge> random_symmetric_edges(std::size_t n, double p, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Edge> edges;
    for (std::uint32_t u = 0; u < n; ++u) {
        for (std::uint32_t v = static_cast<std::uint32_t>(u + 1); v < n; ++v) {
            if (rng.uniform() < p) {
                edges.emplace_back(u, v);
                edges.emplace_back(v, u);
            }
        }
    }
    return edges;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed,
                            double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    Matrix m(r, c);
    for (double& v : m.data) {
        v = rng.uniform(lo, hi);
    }
    return m;
}

/// Self-looped pattern plus its transpose and entry permutation, the triple
/// the attention ops take.
struct PatternTriple {
    CsrMatrix pattern;
    CsrMatrix pattern_t;
    std::vector<std::uint32_t> perm;
};

inline PatternTriple make_pattern(std::size_t n, double p, std::uint64_t seed) {
    PatternTriple out;
    out.pattern = add_self_loops(csr_from_edges(n, n, random_symmetric_edges(n, p, seed)));
    out.pattern_t = transpose(out.pattern, &out.perm);
    return out;
}

} // namespace gesm::testing
