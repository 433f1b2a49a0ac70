#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gbs/bitset.hpp"
#include "gbs/error.hpp"

namespace gbs {

using Vertex = std::uint32_t;

/// Undirected edge stored with u < v.
struct Edge {
    Vertex u = 0;
    Vertex v = 0;

    Edge() = default;
    Edge(Vertex a, Vertex b) : u(std::min(a, b)), v(std::max(a, b)) {}

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline std::uint64_t edge_key(Vertex a, Vertex b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

/// Immutable undirected graph with optional strictly positive edge weights.
///
/// Edges are kept in canonical sorted order; adjacency rows mirror the edge list.
class Graph {
public:
    Graph() = default;

    explicit Graph(std::size_t n_vertices, std::vector<Edge> edges = {},
                   std::optional<std::vector<double>> weights = std::nullopt)
        : n_(n_vertices) {
        if (weights && weights->size() != edges.size())
            throw ConfigError("weight list length does not match edge list");
        std::vector<std::size_t> order(edges.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return edges[a] < edges[b]; });

        edges_.reserve(edges.size());
        if (weights) weights_.emplace().reserve(edges.size());
        adjacency_.assign(n_, Bitset(n_));
        for (std::size_t i : order) {
            const Edge e = edges[i];
            if (e.u == e.v) throw ConfigError("self-loop at vertex " + std::to_string(e.u));
            if (e.v >= n_)
                throw ConfigError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                  ") out of range for " + std::to_string(n_) + " vertices");
            if (!edges_.empty() && edges_.back() == e)
                throw ConfigError("duplicate edge (" + std::to_string(e.u) + "," +
                                  std::to_string(e.v) + ")");
            if (weights) {
                const double w = (*weights)[i];
                if (!(w > 0.0)) throw ConfigError("edge weights must be strictly positive");
                weights_->push_back(w);
            }
            index_.emplace(edge_key(e.u, e.v), static_cast<std::uint32_t>(edges_.size()));
            edges_.push_back(e);
            adjacency_[e.u].set(e.v);
            adjacency_[e.v].set(e.u);
        }
    }

    std::size_t n_vertices() const { return n_; }
    std::size_t n_edges() const { return edges_.size(); }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(std::size_t i) const { return edges_[i]; }

    bool weighted() const { return weights_.has_value(); }
    const std::optional<std::vector<double>>& weights() const { return weights_; }
    double weight(std::size_t edge_index) const { return weights_ ? (*weights_)[edge_index] : 1.0; }
    double weight(Vertex a, Vertex b) const {
        if (!weights_) return 1.0;
        return (*weights_)[index_.at(edge_key(a, b))];
    }

    std::optional<std::size_t> edge_index(Vertex a, Vertex b) const {
        auto it = index_.find(edge_key(a, b));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    bool has_edge(Vertex a, Vertex b) const { return a < n_ && b < n_ && adjacency_[a].test(b); }

    const Bitset& neighbors(Vertex v) const { return adjacency_[v]; }
    std::size_t degree(Vertex v) const { return adjacency_[v].count(); }

    friend bool operator==(const Graph& a, const Graph& b) {
        return a.n_ == b.n_ && a.edges_ == b.edges_ && a.weights_ == b.weights_;
    }

private:
    std::size_t n_ = 0;
    std::vector<Edge> edges_;
    std::optional<std::vector<double>> weights_;
    std::vector<Bitset> adjacency_;
    std::unordered_map<std::uint64_t, std::uint32_t> index_;
};

/// Subset of a graph's vertices.
struct VertexSet {
    Bitset members;

    VertexSet() = default;
    explicit VertexSet(std::size_t n_vertices) : members(n_vertices) {}
    explicit VertexSet(Bitset bits) : members(std::move(bits)) {}

    static VertexSet all(std::size_t n) {
        VertexSet s(n);
        for (std::size_t i = 0; i < n; ++i) s.members.set(i);
        return s;
    }
    static VertexSet of(std::size_t n, const std::vector<Vertex>& vs) {
        VertexSet s(n);
        for (auto v : vs) {
            if (v >= n) throw ConfigError("vertex " + std::to_string(v) + " out of range");
            s.members.set(v);
        }
        return s;
    }

    std::size_t size() const { return members.count(); }
    bool empty() const { return members.none(); }
    bool contains(Vertex v) const { return members.test(v); }
    std::string to_hex() const { return members.to_hex(); }
    std::vector<Vertex> list() const {
        std::vector<Vertex> out;
        members.for_each([&](std::size_t i) { out.push_back(static_cast<Vertex>(i)); });
        return out;
    }

    friend bool operator==(const VertexSet&, const VertexSet&) = default;
    friend auto operator<=>(const VertexSet&, const VertexSet&) = default;
};

/// Set of pairwise vertex-disjoint edges, stored as a mate array.
class Matching {
public:
    static constexpr std::int32_t kFree = -1;

    Matching() = default;
    explicit Matching(std::size_t n_vertices) : mate_(n_vertices, kFree) {}

    static Matching from_edges(std::size_t n_vertices, const std::vector<Edge>& edges) {
        Matching m(n_vertices);
        for (const auto& e : edges) {
            if (e.v >= n_vertices || e.u == e.v) throw ConfigError("matching edge out of range");
            if (m.covers(e.u) || m.covers(e.v))
                throw ConfigError("matching edges are not vertex-disjoint");
            m.add(e.u, e.v);
        }
        return m;
    }

    std::size_t n_vertices() const { return mate_.size(); }
    std::size_t size() const { return n_edges_; }
    bool empty() const { return n_edges_ == 0; }

    bool covers(Vertex v) const { return mate_[v] != kFree; }
    std::int32_t mate(Vertex v) const { return mate_[v]; }
    bool contains(Vertex a, Vertex b) const { return mate_[a] == static_cast<std::int32_t>(b); }
    bool contains(const Edge& e) const { return contains(e.u, e.v); }
    bool is_perfect() const { return 2 * n_edges_ == mate_.size(); }

    void add(Vertex a, Vertex b) {
        mate_[a] = static_cast<std::int32_t>(b);
        mate_[b] = static_cast<std::int32_t>(a);
        ++n_edges_;
    }
    void remove(Vertex a, Vertex b) {
        mate_[a] = kFree;
        mate_[b] = kFree;
        --n_edges_;
    }

    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        out.reserve(n_edges_);
        for (std::size_t v = 0; v < mate_.size(); ++v)
            if (mate_[v] > static_cast<std::int32_t>(v))
                out.emplace_back(static_cast<Vertex>(v), static_cast<Vertex>(mate_[v]));
        return out;
    }

    VertexSet vertex_set() const {
        VertexSet s(mate_.size());
        for (std::size_t v = 0; v < mate_.size(); ++v)
            if (mate_[v] != kFree) s.members.set(v);
        return s;
    }

    /// Canonical encoding: sorted edges as "u-v" joined by '.', "-" for the empty matching.
    std::string key() const {
        if (n_edges_ == 0) return "-";
        std::string out;
        for (std::size_t v = 0; v < mate_.size(); ++v) {
            if (mate_[v] <= static_cast<std::int32_t>(v)) continue;
            if (!out.empty()) out += '.';
            out += std::to_string(v);
            out += '-';
            out += std::to_string(mate_[v]);
        }
        return out;
    }

    /// True when every edge belongs to g and no vertex is covered twice.
    bool is_matching_of(const Graph& g) const {
        if (mate_.size() != g.n_vertices()) return false;
        std::size_t count = 0;
        for (std::size_t v = 0; v < mate_.size(); ++v) {
            const auto m = mate_[v];
            if (m == kFree) continue;
            if (m < 0 || static_cast<std::size_t>(m) >= mate_.size()) return false;
            if (mate_[static_cast<std::size_t>(m)] != static_cast<std::int32_t>(v)) return false;
            if (!g.has_edge(static_cast<Vertex>(v), static_cast<Vertex>(m))) return false;
            ++count;
        }
        return count == 2 * n_edges_;
    }

    friend bool operator==(const Matching& a, const Matching& b) { return a.mate_ == b.mate_; }

private:
    std::vector<std::int32_t> mate_;
    std::size_t n_edges_ = 0;
};

/// Induced subgraph with its dense relabeling (local index -> parent vertex).
struct InducedSubgraph {
    Graph graph;
    std::vector<Vertex> to_parent;

    /// Parent-vertex -> local index, or -1 for vertices outside the subgraph.
    std::vector<std::int32_t> local_index(std::size_t parent_n) const {
        std::vector<std::int32_t> out(parent_n, -1);
        for (std::size_t i = 0; i < to_parent.size(); ++i)
            out[to_parent[i]] = static_cast<std::int32_t>(i);
        return out;
    }

    Matching to_local(const Matching& parent) const {
        const auto idx = local_index(parent.n_vertices());
        Matching m(to_parent.size());
        for (const auto& e : parent.edges()) {
            const auto a = idx[e.u], b = idx[e.v];
            if (a < 0 || b < 0) throw ConfigError("matching leaves the induced subgraph");
            m.add(static_cast<Vertex>(a), static_cast<Vertex>(b));
        }
        return m;
    }

    Matching to_parent_matching(const Matching& local, std::size_t parent_n) const {
        Matching m(parent_n);
        for (const auto& e : local.edges()) m.add(to_parent[e.u], to_parent[e.v]);
        return m;
    }
};

inline InducedSubgraph induced_subgraph(const Graph& g, const VertexSet& s) {
    if (s.members.size() != g.n_vertices())
        throw ConfigError("vertex set sized for a different graph");
    InducedSubgraph out;
    out.to_parent = s.list();
    std::vector<std::int32_t> local(g.n_vertices(), -1);
    for (std::size_t i = 0; i < out.to_parent.size(); ++i)
        local[out.to_parent[i]] = static_cast<std::int32_t>(i);

    std::vector<Edge> edges;
    std::vector<double> weights;
    for (std::size_t i = 0; i < out.to_parent.size(); ++i) {
        const Vertex v = out.to_parent[i];
        const Bitset row = g.neighbors(v) & s.members;
        row.for_each([&](std::size_t u) {
            if (u <= v) return;
            edges.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(local[u]));
            if (g.weighted()) weights.push_back(g.weight(v, static_cast<Vertex>(u)));
        });
    }
    if (g.weighted())
        out.graph = Graph(out.to_parent.size(), std::move(edges), std::move(weights));
    else
        out.graph = Graph(out.to_parent.size(), std::move(edges));
    return out;
}

/// Result of rescaling weights so the smallest is 1.
struct NormalizedGraph {
    Graph graph;
    double lambda = 1.0; // lambda * w_min
    double w_min = 1.0;
};

/// Rescales w' = w / w_min and lambda' = lambda * w_min, which leaves
/// lambda^|S| Haf^2(S) unchanged for every vertex set S.
inline NormalizedGraph normalize_weights(const Graph& g, double lambda) {
    NormalizedGraph out{g, lambda, 1.0};
    if (!g.weighted() || g.n_edges() == 0) return out;
    const auto& w = *g.weights();
    const double w_min = *std::min_element(w.begin(), w.end());
    std::vector<double> scaled(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) scaled[i] = w[i] / w_min;
    out.graph = Graph(g.n_vertices(), g.edges(), std::move(scaled));
    out.lambda = lambda * w_min;
    out.w_min = w_min;
    return out;
}

// Edge-list text format
//   header: "n_vertices n_edges [weighted]"
//   body:   one "u v [w]" per edge; '#' starts a comment line.

inline Graph read_edge_list(std::istream& in) {
    std::string line;
    std::optional<std::size_t> n, m;
    bool weighted = false;
    std::vector<Edge> edges;
    std::vector<double> weights;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        if (!n) {
            std::size_t nv = 0, ne = 0;
            if (!(ls >> nv >> ne)) throw ConfigError("edge list: malformed header at line " + std::to_string(line_no));
            std::string flag;
            if (ls >> flag) {
                if (flag != "weighted") throw ConfigError("edge list: unknown header flag '" + flag + "'");
                weighted = true;
            }
            n = nv;
            m = ne;
            continue;
        }
        long long u = -1, v = -1;
        if (!(ls >> u >> v) || u < 0 || v < 0)
            throw ConfigError("edge list: malformed edge at line " + std::to_string(line_no));
        edges.emplace_back(static_cast<Vertex>(u), static_cast<Vertex>(v));
        if (weighted) {
            double w = 0;
            if (!(ls >> w)) throw ConfigError("edge list: missing weight at line " + std::to_string(line_no));
            weights.push_back(w);
        }
    }
    if (!n) throw ConfigError("edge list: missing header");
    if (edges.size() != *m)
        throw ConfigError("edge list: header declares " + std::to_string(*m) + " edges, found " +
                          std::to_string(edges.size()));
    if (weighted) return Graph(*n, std::move(edges), std::move(weights));
    return Graph(*n, std::move(edges));
}

inline void write_edge_list(std::ostream& out, const Graph& g) {
    out << g.n_vertices() << ' ' << g.n_edges();
    if (g.weighted()) out << " weighted";
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < g.n_edges(); ++i) {
        const auto& e = g.edge(i);
        out << e.u << ' ' << e.v;
        if (g.weighted()) {
            std::snprintf(buf, sizeof buf, " %.17g", g.weight(i));
            out << buf;
        }
        out << '\n';
    }
}

inline std::string to_edge_list(const Graph& g) {
    std::ostringstream os;
    write_edge_list(os, g);
    return os.str();
}

inline Graph parse_edge_list(const std::string& text) {
    std::istringstream is(text);
    return read_edge_list(is);
}

} // namespace gbs
