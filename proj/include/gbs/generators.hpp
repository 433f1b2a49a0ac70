#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gbs/graph.hpp"
#include "gbs/rng.hpp"

namespace gbs {

enum class GeneratorKind {
    planted_clique,    // G1
    decreasing_degree, // G2
    erdos_renyi,       // G3
    random_bipartite,  // G4
    sparse_bipartite,  // G5
    complete,
    complete_bipartite,
    hard_instance,
};

/// Parameters for one benchmark graph family. Fields not used by a kind are ignored.
struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::complete;
    std::size_t n = 0;           // vertices, or vertices per side for bipartite kinds
    std::size_t m = 0;           // second side for complete_bipartite
    std::size_t clique_size = 0; // planted_clique
    double p = 0.0;              // edge probability
    std::size_t n_edges = 0;     // sparse_bipartite
    std::size_t n_squares = 0;   // hard_instance

    static GeneratorSpec planted_clique(std::size_t n, std::size_t clique, double p) {
        return {GeneratorKind::planted_clique, n, 0, clique, p, 0, 0};
    }
    static GeneratorSpec decreasing_degree(std::size_t n) {
        return {GeneratorKind::decreasing_degree, n, 0, 0, 0.0, 0, 0};
    }
    static GeneratorSpec erdos_renyi(std::size_t n, double p) {
        return {GeneratorKind::erdos_renyi, n, 0, 0, p, 0, 0};
    }
    static GeneratorSpec random_bipartite(std::size_t per_side, double p) {
        return {GeneratorKind::random_bipartite, per_side, 0, 0, p, 0, 0};
    }
    static GeneratorSpec sparse_bipartite(std::size_t per_side, std::size_t n_edges) {
        return {GeneratorKind::sparse_bipartite, per_side, 0, 0, 0.0, n_edges, 0};
    }
    static GeneratorSpec complete(std::size_t n) { return {GeneratorKind::complete, n, 0, 0, 0.0, 0, 0}; }
    static GeneratorSpec complete_bipartite(std::size_t a, std::size_t b) {
        return {GeneratorKind::complete_bipartite, a, b, 0, 0.0, 0, 0};
    }
    static GeneratorSpec hard_instance(std::size_t squares) {
        return {GeneratorKind::hard_instance, 0, 0, 0, 0.0, 0, squares};
    }

    /// Stable text form, used in config hashes and manifests.
    std::string describe() const {
        char buf[160];
        switch (kind) {
        case GeneratorKind::planted_clique:
            std::snprintf(buf, sizeof buf, "planted-clique(n=%zu,clique=%zu,p=%.17g)", n, clique_size, p);
            break;
        case GeneratorKind::decreasing_degree:
            std::snprintf(buf, sizeof buf, "decreasing-degree(n=%zu)", n);
            break;
        case GeneratorKind::erdos_renyi:
            std::snprintf(buf, sizeof buf, "er(n=%zu,p=%.17g)", n, p);
            break;
        case GeneratorKind::random_bipartite:
            std::snprintf(buf, sizeof buf, "bipartite(side=%zu,p=%.17g)", n, p);
            break;
        case GeneratorKind::sparse_bipartite:
            std::snprintf(buf, sizeof buf, "sparse-bipartite(side=%zu,edges=%zu)", n, n_edges);
            break;
        case GeneratorKind::complete:
            std::snprintf(buf, sizeof buf, "complete(n=%zu)", n);
            break;
        case GeneratorKind::complete_bipartite:
            std::snprintf(buf, sizeof buf, "complete-bipartite(m=%zu,n=%zu)", n, m);
            break;
        case GeneratorKind::hard_instance:
            std::snprintf(buf, sizeof buf, "hard-instance(squares=%zu)", n_squares);
            break;
        }
        return buf;
    }
};

namespace detail {

inline void check_probability(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("edge probability must lie in [0,1]");
}

} // namespace detail

/// Vertex index of corner (1..4, clockwise) of square `square` in hard_instance.
inline Vertex hard_instance_vertex(std::size_t square, unsigned corner) {
    return static_cast<Vertex>(4 * square + (corner - 1));
}

/// The unique perfect matching of hard_instance(n) that uses the inter-square
/// connectors: every diagonal (1,3) plus every connector (2 of square i, 4 of square i-1).
inline Matching hard_instance_m0(std::size_t n_squares) {
    Matching m(4 * n_squares);
    for (std::size_t i = 0; i < n_squares; ++i) {
        const std::size_t prev = (i + n_squares - 1) % n_squares;
        m.add(hard_instance_vertex(i, 1), hard_instance_vertex(i, 3));
        m.add(hard_instance_vertex(i, 2), hard_instance_vertex(prev, 4));
    }
    return m;
}

/// Builds a benchmark graph. Deterministic in (spec, seed); the seed is unused by
/// the deterministic families.
inline Graph gen_graph(const GeneratorSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Edge> edges;
    switch (spec.kind) {
    case GeneratorKind::planted_clique: {
        detail::check_probability(spec.p);
        if (spec.clique_size > spec.n) throw ConfigError("planted clique larger than the graph");
        // clique occupies vertices 0..clique_size-1
        for (std::size_t i = 0; i < spec.n; ++i)
            for (std::size_t j = i + 1; j < spec.n; ++j) {
                const bool in_clique = j < spec.clique_size;
                if (in_clique || rng.bernoulli(spec.p))
                    edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(j));
            }
        return Graph(spec.n, std::move(edges));
    }
    case GeneratorKind::decreasing_degree: {
        // (i, j) present iff i + j <= n - 1, i != j
        for (std::size_t i = 0; i < spec.n; ++i)
            for (std::size_t j = i + 1; j < spec.n && i + j <= spec.n - 1; ++j)
                edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(j));
        return Graph(spec.n, std::move(edges));
    }
    case GeneratorKind::erdos_renyi: {
        detail::check_probability(spec.p);
        for (std::size_t i = 0; i < spec.n; ++i)
            for (std::size_t j = i + 1; j < spec.n; ++j)
                if (rng.bernoulli(spec.p)) edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(j));
        return Graph(spec.n, std::move(edges));
    }
    case GeneratorKind::random_bipartite: {
        detail::check_probability(spec.p);
        const std::size_t a = spec.n;
        for (std::size_t i = 0; i < a; ++i)
            for (std::size_t j = 0; j < a; ++j)
                if (rng.bernoulli(spec.p)) edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(a + j));
        return Graph(2 * a, std::move(edges));
    }
    case GeneratorKind::sparse_bipartite: {
        const std::size_t a = spec.n;
        const std::size_t pairs = a * a;
        if (spec.n_edges > pairs) throw ConfigError("more edges requested than vertex pairs available");
        // partial Fisher-Yates over the a*a cross pairs
        std::vector<std::uint32_t> ids(pairs);
        for (std::size_t i = 0; i < pairs; ++i) ids[i] = static_cast<std::uint32_t>(i);
        for (std::size_t i = 0; i < spec.n_edges; ++i) {
            const std::size_t j = i + rng.below(pairs - i);
            std::swap(ids[i], ids[j]);
            edges.emplace_back(static_cast<Vertex>(ids[i] / a), static_cast<Vertex>(a + ids[i] % a));
        }
        return Graph(2 * a, std::move(edges));
    }
    case GeneratorKind::complete: {
        for (std::size_t i = 0; i < spec.n; ++i)
            for (std::size_t j = i + 1; j < spec.n; ++j)
                edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(j));
        return Graph(spec.n, std::move(edges));
    }
    case GeneratorKind::complete_bipartite: {
        for (std::size_t i = 0; i < spec.n; ++i)
            for (std::size_t j = 0; j < spec.m; ++j)
                edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(spec.n + j));
        return Graph(spec.n + spec.m, std::move(edges));
    }
    case GeneratorKind::hard_instance: {
        const std::size_t n = spec.n_squares;
        if (n == 0) throw ConfigError("hard instance needs at least one square");
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = [&](unsigned corner) { return hard_instance_vertex(i, corner); };
            edges.emplace_back(c(1), c(2));
            edges.emplace_back(c(2), c(3));
            edges.emplace_back(c(3), c(4));
            edges.emplace_back(c(4), c(1));
            edges.emplace_back(c(1), c(3));
            edges.emplace_back(c(2), hard_instance_vertex((i + n - 1) % n, 4));
        }
        return Graph(4 * n, std::move(edges));
    }
    }
    throw ConfigError("unknown generator kind");
}

/// Path on n vertices (n - 1 edges).
inline Graph path_graph(std::size_t n) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(i + 1));
    return Graph(n, std::move(edges));
}

inline Graph cycle_graph(std::size_t n) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>((i + 1) % n));
    return Graph(n, std::move(edges));
}

} // namespace gbs
