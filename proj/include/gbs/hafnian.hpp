#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "gbs/error.hpp"
#include "gbs/graph.hpp"

namespace gbs {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Hafnian of an induced subgraph: the perfect-matching count (unweighted), or the
/// sum over perfect matchings of the product of edge weights (weighted).
struct HafnianValue {
    bool weighted = false;
    BigInt count = 0;
    double weight_sum = 0.0;

    double to_double() const { return weighted ? weight_sum : count.convert_to<double>(); }
    bool is_zero() const { return weighted ? weight_sum == 0.0 : count == 0; }
};

struct HafnianOptions {
    /// Cache sub-results keyed by the uncovered-vertex mask. Pays off on dense
    /// graphs up to ~30 vertices; the key space explodes beyond that.
    bool memoize = false;
};

/// Exact rational value of a double (every finite double is a dyadic rational).
inline Rational exact_rational(double x) {
    if (x == 0.0) return Rational(0);
    int exp = 0;
    const double mant = std::frexp(x, &exp);
    // mant * 2^53 is an integer
    const auto scaled = static_cast<long long>(std::ldexp(mant, 53));
    Rational r(scaled);
    const int shift = exp - 53;
    if (shift >= 0)
        r *= Rational(BigInt(1) << shift);
    else
        r /= Rational(BigInt(1) << (-shift));
    return r;
}

namespace detail {

struct OverflowSignal {};

// Branch-and-sum over the lowest uncovered vertex. Local graph with at most 64
// vertices, adjacency as 64-bit rows.
template <class Value, class WeightFn, class AddFn, class MulFn>
class SmallHafnian {
public:
    SmallHafnian(const std::vector<std::uint64_t>& adj, WeightFn weight, AddFn add, MulFn mul, bool memoize)
        : adj_(adj), weight_(weight), add_(add), mul_(mul), memoize_(memoize) {}

    Value run(std::uint64_t avail) {
        if (avail == 0) return Value(1);
        if (std::popcount(avail) & 1) return Value(0);
        // any isolated vertex kills every completion
        for (std::uint64_t rest = avail; rest; rest &= rest - 1) {
            const int v = std::countr_zero(rest);
            if ((adj_[static_cast<std::size_t>(v)] & avail) == 0) return Value(0);
        }
        if (memoize_) {
            auto it = memo_.find(avail);
            if (it != memo_.end()) return it->second;
        }
        const int v = std::countr_zero(avail);
        const std::uint64_t without_v = avail & (avail - 1);
        std::uint64_t cand = adj_[static_cast<std::size_t>(v)] & without_v;
        Value total(0);
        while (cand) {
            const int u = std::countr_zero(cand);
            cand &= cand - 1;
            Value sub = run(without_v & ~(std::uint64_t{1} << u));
            total = add_(total, mul_(weight_(v, u), sub));
        }
        if (memoize_) memo_.emplace(avail, total);
        return total;
    }

private:
    const std::vector<std::uint64_t>& adj_;
    WeightFn weight_;
    AddFn add_;
    MulFn mul_;
    bool memoize_;
    std::unordered_map<std::uint64_t, Value> memo_;
};

// Same recursion for local graphs beyond 64 vertices.
template <class Value, class WeightFn, class AddFn, class MulFn>
Value large_hafnian(const Graph& g, Bitset avail, WeightFn weight, AddFn add, MulFn mul) {
    if (avail.none()) return Value(1);
    if (avail.count() & 1) return Value(0);
    bool isolated = false;
    avail.for_each([&](std::size_t v) {
        if (!isolated && !g.neighbors(static_cast<Vertex>(v)).intersects(avail)) isolated = true;
    });
    if (isolated) return Value(0);
    const std::size_t v = avail.first();
    avail.reset(v);
    const Bitset cand = g.neighbors(static_cast<Vertex>(v)) & avail;
    Value total(0);
    cand.for_each([&](std::size_t u) {
        Bitset next = avail;
        next.reset(u);
        total = add(total, mul(weight(static_cast<int>(v), static_cast<int>(u)),
                               large_hafnian<Value>(g, std::move(next), weight, add, mul)));
    });
    return total;
}

template <class Value, class WeightFn, class AddFn, class MulFn>
Value hafnian_of_local(const Graph& local, WeightFn weight, AddFn add, MulFn mul, bool memoize) {
    const std::size_t n = local.n_vertices();
    if (n <= 64) {
        std::vector<std::uint64_t> adj(n, 0);
        for (const auto& e : local.edges()) {
            adj[e.u] |= std::uint64_t{1} << e.v;
            adj[e.v] |= std::uint64_t{1} << e.u;
        }
        const std::uint64_t all = n == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
        SmallHafnian<Value, WeightFn, AddFn, MulFn> h(adj, weight, add, mul, memoize);
        return h.run(all);
    }
    Bitset all(n);
    for (std::size_t i = 0; i < n; ++i) all.set(i);
    return large_hafnian<Value>(local, std::move(all), weight, add, mul);
}

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw OverflowSignal{};
    return r;
}

inline HafnianValue hafnian_local(const Graph& local, const HafnianOptions& opt) {
    HafnianValue out;
    if (local.weighted()) {
        out.weighted = true;
        const auto w = [&](int a, int b) { return local.weight(static_cast<Vertex>(a), static_cast<Vertex>(b)); };
        out.weight_sum = hafnian_of_local<double>(
            local, w, [](double a, double b) { return a + b; }, [](double a, double b) { return a * b; },
            opt.memoize);
        return out;
    }
    const auto one = [](int, int) { return 1; };
    try {
        // every transition multiplies by weight one, so the product is just the sub-count
        out.count = hafnian_of_local<std::uint64_t>(
            local, one, checked_add, [](int, std::uint64_t b) { return b; }, opt.memoize);
    } catch (const OverflowSignal&) {
        out.count = hafnian_of_local<BigInt>(
            local, one, [](const BigInt& a, const BigInt& b) { return BigInt(a + b); },
            [](int, const BigInt& b) { return b; }, opt.memoize);
    }
    return out;
}

} // namespace detail

/// Exact Hafnian of the subgraph induced by s. Odd |s| gives 0, empty s gives 1.
inline HafnianValue hafnian(const Graph& g, const VertexSet& s, const HafnianOptions& opt = {}) {
    if (s.size() & 1) {
        HafnianValue zero;
        zero.weighted = g.weighted();
        return zero;
    }
    return detail::hafnian_local(induced_subgraph(g, s).graph, opt);
}

inline HafnianValue hafnian(const Graph& g, const HafnianOptions& opt = {}) {
    if (g.n_vertices() & 1) {
        HafnianValue zero;
        zero.weighted = g.weighted();
        return zero;
    }
    return detail::hafnian_local(g, opt);
}

/// Hafnian as an exact rational; weights are taken at their exact double values.
inline Rational hafnian_rational(const Graph& g, const VertexSet& s) {
    if (s.size() & 1) return Rational(0);
    const Graph local = induced_subgraph(g, s).graph;
    if (!local.weighted()) return Rational(hafnian(local).count);
    const auto w = [&](int a, int b) {
        return exact_rational(local.weight(static_cast<Vertex>(a), static_cast<Vertex>(b)));
    };
    return detail::hafnian_of_local<Rational>(
        local, w, [](const Rational& a, const Rational& b) { return Rational(a + b); },
        [](const Rational& a, const Rational& b) { return Rational(a * b); }, false);
}

/// Induced edge count divided by |s|.
inline double density(const Graph& g, const VertexSet& s) {
    const std::size_t k = s.size();
    if (k == 0) throw ConfigError("density of an empty vertex set is undefined");
    std::size_t twice_edges = 0;
    s.members.for_each([&](std::size_t v) {
        twice_edges += (g.neighbors(static_cast<Vertex>(v)) & s.members).count();
    });
    return static_cast<double>(twice_edges / 2) / static_cast<double>(k);
}

// ---------------------------------------------------------------------------
// Brute-force enumeration oracles

struct EnumerationLimits {
    std::optional<std::size_t> max_size; // in edges; unbounded when absent
    std::size_t cap = 2'000'000;         // refuse beyond this many results
};

namespace detail {

inline void enumerate_rec(const Graph& g, std::size_t next_edge, Matching& cur,
                          const EnumerationLimits& lim, std::vector<Matching>& out) {
    if (out.size() >= lim.cap)
        throw GuardExceeded("matching enumeration exceeds cap of " + std::to_string(lim.cap));
    out.push_back(cur);
    if (lim.max_size && cur.size() >= *lim.max_size) return;
    for (std::size_t i = next_edge; i < g.n_edges(); ++i) {
        const Edge& e = g.edge(i);
        if (cur.covers(e.u) || cur.covers(e.v)) continue;
        cur.add(e.u, e.v);
        enumerate_rec(g, i + 1, cur, lim, out);
        cur.remove(e.u, e.v);
    }
}

inline void perfect_rec(const Graph& g, Matching& cur, std::size_t cap, std::vector<Matching>& out) {
    std::size_t v = 0;
    while (v < g.n_vertices() && cur.covers(static_cast<Vertex>(v))) ++v;
    if (v == g.n_vertices()) {
        if (out.size() >= cap)
            throw GuardExceeded("perfect matching enumeration exceeds cap of " + std::to_string(cap));
        out.push_back(cur);
        return;
    }
    g.neighbors(static_cast<Vertex>(v)).for_each([&](std::size_t u) {
        if (u < v || cur.covers(static_cast<Vertex>(u))) return;
        cur.add(static_cast<Vertex>(v), static_cast<Vertex>(u));
        perfect_rec(g, cur, cap, out);
        cur.remove(static_cast<Vertex>(v), static_cast<Vertex>(u));
    });
}

} // namespace detail

/// Every matching of g (including the empty one) with at most max_size edges.
inline std::vector<Matching> enumerate_matchings(const Graph& g, const EnumerationLimits& lim = {}) {
    std::vector<Matching> out;
    Matching cur(g.n_vertices());
    detail::enumerate_rec(g, 0, cur, lim, out);
    return out;
}

inline std::vector<Matching> enumerate_perfect_matchings(const Graph& g, std::size_t cap = 2'000'000) {
    std::vector<Matching> out;
    if (g.n_vertices() & 1) return out;
    Matching cur(g.n_vertices());
    detail::perfect_rec(g, cur, cap, out);
    return out;
}

/// Product of the edge weights of m (1 for unweighted graphs).
inline double matching_weight(const Graph& g, const Matching& m) {
    if (!g.weighted()) return 1.0;
    double w = 1.0;
    for (const auto& e : m.edges()) w *= g.weight(e.u, e.v);
    return w;
}

} // namespace gbs
