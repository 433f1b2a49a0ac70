#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gbs/error.hpp"
#include "gbs/graph.hpp"
#include "gbs/hafnian.hpp"
#include "gbs/matching_chain.hpp"
#include "gbs/rng.hpp"

namespace gbs {

/// Budget of the (near-)uniform perfect-matching sampler.
///
/// An attempt runs inner_steps steps of the perfect/near-perfect chain and succeeds
/// when the state is perfect. Zero for inner_steps or max_attempts selects the
/// defaults below, which depend on n = |V|/2 of the graph being sampled.
struct PMSamplerConfig {
    double eta = 0.01;               // failure budget
    std::uint64_t inner_steps = 0;   // default ceil(c_mix * n^4)
    double c_mix = 1.0;
    std::uint64_t max_attempts = 0;  // default ceil((2 + 4 n^2) ln(2 / eta))
    std::uint64_t seed = 0;

    void validate() const {
        if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("failure budget eta must lie in (0,1)");
        if (!(c_mix > 0.0)) throw ConfigError("c_mix must be positive");
    }

    std::uint64_t resolved_inner_steps(std::size_t n_half) const {
        if (inner_steps) return inner_steps;
        const double n = static_cast<double>(n_half);
        return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(c_mix * n * n * n * n)));
    }

    std::uint64_t resolved_max_attempts(std::size_t n_half) const {
        if (max_attempts) return max_attempts;
        const double n = static_cast<double>(n_half);
        return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil((2.0 + 4.0 * n * n) * std::log(2.0 / eta))));
    }
};

/// True when m is a perfect or near-perfect matching of g.
inline bool in_pm_state_space(const Graph& g, const Matching& m) {
    if (g.n_vertices() & 1) return false;
    const std::size_t n = g.n_vertices() / 2;
    return m.is_matching_of(g) && (m.size() == n || m.size() + 1 == n);
}

/// Move of the perfect/near-perfect chain for chosen edge e = (u, v).
///
/// Unweighted: every listed move is taken with probability one. Weighted (weights
/// >= 1): removal w.p. 1/w_e, slide w.p. min{1, w_e / w_dropped}.
inline Move pm_move(const Graph& g, const Matching& m, const Edge& e, bool use_weights) {
    Move mv;
    const std::size_t n = g.n_vertices() / 2;
    const bool cu = m.covers(e.u), cv = m.covers(e.v);
    if (m.size() == n) {
        if (m.contains(e)) {
            mv.kind = MoveKind::remove;
            mv.dropped = e;
            mv.accept = use_weights ? 1.0 / g.weight(e.u, e.v) : 1.0;
        }
        return mv;
    }
    if (!cu && !cv) {
        mv.kind = MoveKind::add;
        mv.added = e;
        mv.accept = 1.0;
    } else if (cu != cv) {
        const Vertex matched = cu ? e.u : e.v;
        const Vertex partner = static_cast<Vertex>(m.mate(matched));
        mv.kind = MoveKind::slide;
        mv.added = e;
        mv.dropped = Edge(matched, partner);
        mv.accept = use_weights ? std::min(1.0, g.weight(e.u, e.v) / g.weight(matched, partner)) : 1.0;
    }
    return mv;
}

inline void pm_step_inplace(const Graph& g, Matching& m, bool use_weights, Rng& rng) {
    if (g.n_edges() == 0) return;
    const Edge& e = g.edge(rng.below(g.n_edges()));
    const Move mv = pm_move(g, m, e, use_weights);
    if (mv.kind == MoveKind::stay) return;
    if (mv.accept >= 1.0 || rng.bernoulli(mv.accept)) apply_move(m, mv);
}

inline Matching pm_chain_step(const Graph& g, Matching m, Rng& rng) {
    if (!in_pm_state_space(g, m)) throw ConfigError("state is neither perfect nor near-perfect");
    pm_step_inplace(g, m, false, rng);
    return m;
}

/// Weighted variant; stationary law proportional to the product of edge weights.
/// Requires all weights >= 1 (see normalize_weights).
inline Matching weighted_pm_chain_step(const Graph& g, Matching m, Rng& rng) {
    if (!in_pm_state_space(g, m)) throw ConfigError("state is neither perfect nor near-perfect");
    pm_step_inplace(g, m, true, rng);
    return m;
}

inline std::vector<Transition> pm_kernel(const Graph& g, const Matching& m) {
    return kernel_from_moves(g, m, [&](const Edge& e) { return pm_move(g, m, e, false); });
}

inline std::vector<Transition> weighted_pm_kernel(const Graph& g, const Matching& m) {
    return kernel_from_moves(g, m, [&](const Edge& e) { return pm_move(g, m, e, true); });
}

inline void require_unit_floor(const Graph& g) {
    if (!g.weighted()) return;
    for (double w : *g.weights())
        if (w < 1.0) throw ConfigError("weighted perfect-matching chain needs all weights >= 1; normalize first");
}

/// Draws a perfect matching of g by running the chain from `initial` (itself a
/// perfect matching) and returning the first perfect state seen at the end of an
/// attempt. Weighted graphs sample proportionally to w(M). Returns nullopt when
/// all attempts end in a near-perfect state.
inline std::optional<Matching> sample_perfect_matching(const Graph& g, const PMSamplerConfig& cfg,
                                                       Matching initial, Rng& rng) {
    if (g.n_vertices() & 1) return std::nullopt;
    if (!initial.is_perfect() || !initial.is_matching_of(g))
        throw ConfigError("inner sampler must start from a perfect matching");
    const std::size_t n = g.n_vertices() / 2;
    if (n <= 1) return initial;
    const bool use_weights = g.weighted();
    const std::uint64_t steps = cfg.resolved_inner_steps(n);
    const std::uint64_t attempts = cfg.resolved_max_attempts(n);
    for (std::uint64_t a = 0; a < attempts; ++a) {
        for (std::uint64_t t = 0; t < steps; ++t) pm_step_inplace(g, initial, use_weights, rng);
        if (initial.is_perfect()) return initial;
    }
    return std::nullopt;
}

inline std::optional<Matching> sample_perfect_matching(const Graph& g, const PMSamplerConfig& cfg,
                                                       const Matching& initial) {
    cfg.validate();
    Rng rng(cfg.seed);
    return sample_perfect_matching(g, cfg, initial, rng);
}

/// Exact weighted perfect-matching sampler by self-reduction: the pivot vertex
/// of the remaining set (fewest remaining neighbours, lowest label on ties) is
/// matched to u with probability w(v,u) Haf(rest - u) / Haf(rest). Sub-Hafnians
/// are memoized by vertex mask and shared across draws on different subsets, so
/// one sampler serves every induced subgraph of a graph with at most 64 vertices.
///
/// `growth_cap` > 0 bounds the number of new table entries a single draw may
/// add; exceeding it throws GuardExceeded before any randomness is consumed.
/// The table is cleared when it grows past `table_limit` entries.
class CountingPerfectMatchingSampler {
public:
    explicit CountingPerfectMatchingSampler(const Graph& g, std::size_t growth_cap = 0,
                                            std::size_t table_limit = std::size_t{1} << 21)
        : g_(g), adj_(g.n_vertices(), 0), growth_cap_(growth_cap), table_limit_(table_limit) {
        if (g.n_vertices() > 64) throw GuardExceeded("counting sampler is limited to 64 vertices");
        for (const auto& e : g.edges()) {
            adj_[e.u] |= std::uint64_t{1} << e.v;
            adj_[e.v] |= std::uint64_t{1} << e.u;
        }
        const std::size_t n = g.n_vertices();
        all_ = n == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
    }

    /// Perfect matching of the whole graph; nullopt when there is none.
    std::optional<Matching> draw(Rng& rng) { return draw(rng, all_); }

    /// Perfect matching of the subgraph induced by `mask`, Matching labels as in g.
    std::optional<Matching> draw(Rng& rng, std::uint64_t mask) {
        if (memo_.size() > table_limit_) memo_.clear();
        budget_start_ = memo_.size();
        Matching m(g_.n_vertices());
        if (haf(mask) == 0.0) return std::nullopt;
        std::uint64_t avail = mask;
        while (avail) {
            const int v = pivot(avail);
            const std::uint64_t rest = avail & ~(std::uint64_t{1} << v);
            double r = rng.uniform() * haf(avail);
            int pick = -1;
            for (std::uint64_t cand = adj_[static_cast<std::size_t>(v)] & rest; cand; cand &= cand - 1) {
                const int u = std::countr_zero(cand);
                const double share = weight(v, u) * haf(rest & ~(std::uint64_t{1} << u));
                if (share <= 0.0) continue;
                pick = u;
                if (r < share) break;
                r -= share;
            }
            m.add(static_cast<Vertex>(v), static_cast<Vertex>(pick));
            avail = rest & ~(std::uint64_t{1} << pick);
        }
        return m;
    }

    static std::uint64_t mask_of(const VertexSet& s) {
        std::uint64_t m = 0;
        for (auto v : s.list()) m |= std::uint64_t{1} << v;
        return m;
    }

    std::size_t table_size() const { return memo_.size(); }

private:
    double weight(int a, int b) const {
        return g_.weighted() ? g_.weight(static_cast<Vertex>(a), static_cast<Vertex>(b)) : 1.0;
    }

    // Remaining vertex with the fewest remaining neighbours; -1 flags an isolated one.
    int pivot(std::uint64_t mask) const {
        int best = -1, best_deg = 65;
        for (std::uint64_t m = mask; m; m &= m - 1) {
            const int v = std::countr_zero(m);
            const int d = std::popcount(adj_[static_cast<std::size_t>(v)] & mask);
            if (d < best_deg) {
                best = v;
                best_deg = d;
                if (d <= 1) break;
            }
        }
        return best_deg == 0 ? -1 : best;
    }

    double haf(std::uint64_t mask) {
        if (mask == 0) return 1.0;
        if (std::popcount(mask) & 1) return 0.0;
        auto it = memo_.find(mask);
        if (it != memo_.end()) return it->second;
        const int v = pivot(mask);
        double total = 0.0;
        if (v >= 0) {
            const std::uint64_t rest = mask & ~(std::uint64_t{1} << v);
            for (std::uint64_t cand = adj_[static_cast<std::size_t>(v)] & rest; cand; cand &= cand - 1) {
                const int u = std::countr_zero(cand);
                total += weight(v, u) * haf(rest & ~(std::uint64_t{1} << u));
            }
        }
        if (growth_cap_ && memo_.size() - budget_start_ >= growth_cap_)
            throw GuardExceeded("sub-Hafnian table exceeds its cap");
        memo_.emplace(mask, total);
        return total;
    }

    const Graph& g_;
    std::vector<std::uint64_t> adj_;
    std::uint64_t all_ = 0;
    std::size_t growth_cap_ = 0;
    std::size_t table_limit_ = 0;
    std::size_t budget_start_ = 0;
    std::unordered_map<std::uint64_t, double> memo_;
};

/// Exact sampler: enumerates all perfect matchings of g and draws one with
/// probability proportional to its weight. For small or sparse graphs only.
class ExactPerfectMatchingSampler {
public:
    explicit ExactPerfectMatchingSampler(const Graph& g, std::size_t cap = 2'000'000)
        : matchings_(enumerate_perfect_matchings(g, cap)) {
        cumulative_.reserve(matchings_.size());
        double acc = 0.0;
        for (const auto& m : matchings_) {
            acc += matching_weight(g, m);
            cumulative_.push_back(acc);
        }
    }

    bool empty() const { return matchings_.empty(); }
    const std::vector<Matching>& matchings() const { return matchings_; }

    const Matching& draw(Rng& rng) const {
        if (matchings_.empty()) throw ConfigError("graph has no perfect matching");
        const double r = rng.uniform() * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
        if (it == cumulative_.end()) --it;
        return matchings_[static_cast<std::size_t>(it - cumulative_.begin())];
    }

private:
    std::vector<Matching> matchings_;
    std::vector<double> cumulative_;
};

} // namespace gbs
