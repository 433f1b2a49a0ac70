#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gbs/error.hpp"
#include "gbs/graph.hpp"
#include "gbs/hafnian.hpp"
#include "gbs/matching_chain.hpp"
#include "gbs/pm_sampler.hpp"
#include "gbs/rng.hpp"

namespace gbs {

enum class InnerFailurePolicy { stay, abort };

/// How the perfect matching E_t of G_{V(x)} is drawn on a removal proposal.
enum class InnerSampler {
    chain,    // perfect/near-perfect Markov chain started at x
    exact,    // enumeration of all perfect matchings, cached per vertex set
    counting, // self-reducible exact draw from sub-Hafnian counts (<= 64 vertices)
    adaptive, // counting while its table stays small, else the chain
};

/// New sub-Hafnian table entries one adaptive draw may add before it falls back to the chain.
inline constexpr std::size_t kAdaptiveMemoCap = std::size_t{1} << 15;
/// Longest run of chain draws the adaptive mode takes between counting attempts.
inline constexpr std::uint64_t kAdaptiveMaxBackoff = 1024;

struct DoubleLoopConfig {
    ChainConfig chain; // lambda = c^2
    PMSamplerConfig pm;
    InnerFailurePolicy on_inner_failure = InnerFailurePolicy::stay;
    InnerSampler inner = InnerSampler::chain;
    /// Total error target; when set the per-call failure budget becomes (epsilon/2)/T.
    std::optional<double> epsilon;

    void validate() const {
        chain.validate();
        pm.validate();
        if (epsilon && !(*epsilon > 0.0 && *epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
    }

    PMSamplerConfig effective_pm() const {
        PMSamplerConfig out = pm;
        if (epsilon && chain.steps > 0) out.eta = (*epsilon / 2.0) / static_cast<double>(chain.steps);
        return out;
    }
};

/// Outer step budget ceil(n^6 ln n) capped by `cap`.
inline std::uint64_t default_outer_steps(std::size_t n_vertices, std::uint64_t cap) {
    if (n_vertices < 2) return std::min<std::uint64_t>(cap, 1);
    const double n = static_cast<double>(n_vertices);
    const double t = std::ceil(std::pow(n, 6.0) * std::log(n));
    if (t >= static_cast<double>(cap)) return cap;
    return static_cast<std::uint64_t>(t);
}

/// Stateful outer-step functor for the double-loop dynamics. Handles both the
/// unweighted chain and the weighted chain (weights must be >= 1).
///
/// The inner sampler draws from the same Rng as the outer chain, so one seed
/// fixes the whole trajectory.
class DoubleLoopStepper {
public:
    DoubleLoopStepper(const Graph& g, const DoubleLoopConfig& cfg)
        : g_(g), cfg_(cfg), pm_(cfg.effective_pm()), lambda_sq_(cfg.chain.lambda * cfg.chain.lambda) {
        cfg_.validate();
        require_unit_floor(g_);
    }

    void operator()(Matching& x, Rng& rng) {
        if (g_.n_edges() == 0) return;
        const Edge& e = g_.edge(rng.below(g_.n_edges()));
        const double lazy = laziness(cfg_.chain.lazy);
        if (!x.covers(e.u) && !x.covers(e.v)) {
            if (rng.bernoulli(lazy * lambda_sq_ / (1.0 + lambda_sq_))) x.add(e.u, e.v);
            return;
        }
        if (!x.contains(e)) return;
        ++inner_calls_;
        const auto inner = draw_inner(x, rng);
        if (!inner) {
            ++inner_failures_;
            if (cfg_.on_inner_failure == InnerFailurePolicy::abort)
                throw InnerBudgetExhausted("inner perfect-matching sampler exhausted its attempts");
            return;
        }
        if (!inner->contains(e)) return;
        double p = lazy / (1.0 + lambda_sq_);
        if (g_.weighted()) {
            const double w = g_.weight(e.u, e.v);
            p /= w * w;
        }
        if (rng.bernoulli(p)) x.remove(e.u, e.v);
    }

    std::uint64_t inner_calls() const { return inner_calls_; }
    std::uint64_t inner_failures() const { return inner_failures_; }

private:
    // Perfect matching of G_{V(x)} expressed in parent vertex labels.
    std::optional<Matching> draw_inner(const Matching& x, Rng& rng) {
        const VertexSet s = x.vertex_set();
        if (cfg_.inner == InnerSampler::exact) {
            const std::string key = s.to_hex();
            auto it = exact_cache_.find(key);
            if (it == exact_cache_.end()) {
                auto sub = induced_subgraph(g_, s);
                auto sampler = std::make_shared<ExactPerfectMatchingSampler>(sub.graph);
                it = exact_cache_.emplace(key, CachedExact{std::move(sub), std::move(sampler)}).first;
            }
            const Matching& local = it->second.sampler->draw(rng);
            return it->second.sub.to_parent_matching(local, g_.n_vertices());
        }
        const bool counting = cfg_.inner == InnerSampler::counting || cfg_.inner == InnerSampler::adaptive;
        const bool adaptive = cfg_.inner == InnerSampler::adaptive;
        // a draw that hits its cap consumes no randomness, so falling back keeps
        // the stream identical to a chain-only run from this point
        if (counting && g_.n_vertices() <= 64 && skip_ > 0) {
            --skip_;
        } else if (counting && g_.n_vertices() <= 64) {
            // one table over the parent graph, shared by every V(x)
            if (!counter_) counter_.emplace(g_, adaptive ? kAdaptiveMemoCap : 0);
            try {
                auto m = counter_->draw(rng, CountingPerfectMatchingSampler::mask_of(s));
                backoff_ = 1;
                return m;
            } catch (const GuardExceeded&) {
                if (!adaptive) throw;
                // dense subgraphs keep failing; retry counting only after a doubling pause
                skip_ = backoff_;
                backoff_ = std::min<std::uint64_t>(2 * backoff_, kAdaptiveMaxBackoff);
            }
        }
        const auto sub = induced_subgraph(g_, s);
        if (counting && g_.n_vertices() > 64 && sub.graph.n_vertices() <= 64) {
            try {
                CountingPerfectMatchingSampler sampler(sub.graph, adaptive ? kAdaptiveMemoCap : 0);
                auto local = sampler.draw(rng);
                if (!local) return std::nullopt;
                return sub.to_parent_matching(*local, g_.n_vertices());
            } catch (const GuardExceeded&) {
                if (!adaptive) throw;
            }
        } else if (cfg_.inner == InnerSampler::counting && g_.n_vertices() > 64) {
            throw GuardExceeded("counting sampler is limited to 64 vertices");
        }
        auto local = sample_perfect_matching(sub.graph, pm_, sub.to_local(x), rng);
        if (!local) return std::nullopt;
        return sub.to_parent_matching(*local, g_.n_vertices());
    }

    struct CachedExact {
        InducedSubgraph sub;
        std::shared_ptr<ExactPerfectMatchingSampler> sampler;
    };

    const Graph& g_;
    DoubleLoopConfig cfg_;
    PMSamplerConfig pm_;
    double lambda_sq_;
    std::uint64_t inner_calls_ = 0;
    std::uint64_t inner_failures_ = 0;
    std::unordered_map<std::string, CachedExact> exact_cache_;
    std::optional<CountingPerfectMatchingSampler> counter_;
    std::uint64_t skip_ = 0, backoff_ = 1;
};

inline Matching double_loop_step(const Graph& g, Matching x, const DoubleLoopConfig& cfg, Rng& rng) {
    if (g.weighted()) throw ConfigError("double_loop_step expects an unweighted graph; use weighted_double_loop_step");
    DoubleLoopStepper step(g, cfg);
    step(x, rng);
    return x;
}

inline Matching weighted_double_loop_step(const Graph& g, Matching x, const DoubleLoopConfig& cfg, Rng& rng) {
    if (!g.weighted()) throw ConfigError("weighted_double_loop_step expects a weighted graph");
    DoubleLoopStepper step(g, cfg);
    step(x, rng);
    return x;
}

/// Exact one-step kernel of the double loop with an exact (weighted) inner
/// sampler: removal of e in x happens w.p. Pr[e in E] / ((1 + lambda^2) w_e^2).
inline std::vector<Transition> double_loop_kernel_exact(const Graph& g, const Matching& x,
                                                        const DoubleLoopConfig& cfg) {
    const double lambda_sq = cfg.chain.lambda * cfg.chain.lambda;
    const double lazy = laziness(cfg.chain.lazy);
    // weighted share of perfect matchings of G_{V(x)} that contain each edge of x
    std::map<std::pair<Vertex, Vertex>, double> inclusion;
    if (!x.empty()) {
        const auto sub = induced_subgraph(g, x.vertex_set());
        const auto pms = enumerate_perfect_matchings(sub.graph);
        double total = 0.0;
        for (const auto& m : pms) total += matching_weight(sub.graph, m);
        for (const auto& e : x.edges()) inclusion[{e.u, e.v}] = 0.0;
        for (const auto& m : pms) {
            const double w = matching_weight(sub.graph, m);
            for (const auto& le : m.edges()) {
                const Edge pe(sub.to_parent[le.u], sub.to_parent[le.v]);
                auto it = inclusion.find({pe.u, pe.v});
                if (it != inclusion.end()) it->second += w / total;
            }
        }
    }
    return kernel_from_moves(g, x, [&](const Edge& e) {
        Move mv;
        if (!x.covers(e.u) && !x.covers(e.v)) {
            mv.kind = MoveKind::add;
            mv.added = e;
            mv.accept = lazy * lambda_sq / (1.0 + lambda_sq);
        } else if (x.contains(e)) {
            const double w = g.weight(e.u, e.v);
            mv.kind = MoveKind::remove;
            mv.dropped = e;
            mv.accept = inclusion.at({e.u, e.v}) * lazy / ((1.0 + lambda_sq) * w * w);
        }
        return mv;
    });
}

struct DoubleLoopTrace {
    ChainTrace trace;
    std::uint64_t inner_calls = 0;
    std::uint64_t inner_failures = 0;
};

/// Runs cfg.chain.steps outer steps with the stream seeded by cfg.chain.seed.
/// post_select_size counts vertices (even).
inline DoubleLoopTrace run_double_loop(const Graph& g, const DoubleLoopConfig& cfg,
                                       std::optional<std::size_t> post_select_size = std::nullopt) {
    cfg.validate();
    if (post_select_size && (*post_select_size & 1)) throw ConfigError("post-selection size must be even");
    Rng rng(cfg.chain.seed);
    DoubleLoopStepper step(g, cfg);
    std::optional<std::size_t> edges;
    if (post_select_size) edges = *post_select_size / 2;
    DoubleLoopTrace out;
    out.trace = run_chain(cfg.chain.start(g), cfg.chain.steps, step, rng, edges);
    out.inner_calls = step.inner_calls();
    out.inner_failures = step.inner_failures();
    return out;
}

/// Vertex set of the final state, or of the post-selected state when a size is given.
inline VertexSet sample_vertex_set(const Graph& g, const DoubleLoopConfig& cfg,
                                   std::optional<std::size_t> post_select_size = std::nullopt) {
    const auto run = run_double_loop(g, cfg, post_select_size);
    if (!post_select_size) return run.trace.final.vertex_set();
    if (run.trace.starved())
        throw StarvationError("no state with " + std::to_string(*post_select_size) + " vertices within " +
                              std::to_string(cfg.chain.steps) + " steps");
    return run.trace.post_selected->vertex_set();
}

struct RejectionResult {
    VertexSet set;
    std::uint64_t rounds = 0;
};

/// Runs two independent single-loop chains per round and accepts S1 when S1 == S2.
/// Accepted sets follow (c^|S| Haf(S))^2.
inline RejectionResult rejection_sample(const Graph& g, const ChainConfig& cfg, std::uint64_t max_rounds, Rng& rng) {
    cfg.validate();
    const auto one_chain = [&]() {
        Matching x = cfg.start(g);
        for (std::uint64_t t = 0; t < cfg.steps; ++t) glauber_step_inplace(g, x, cfg.lambda, cfg.lazy, rng);
        return x.vertex_set();
    };
    for (std::uint64_t r = 1; r <= max_rounds; ++r) {
        VertexSet s1 = one_chain();
        const VertexSet s2 = one_chain();
        if (s1 == s2) return {std::move(s1), r};
    }
    throw StarvationError("rejection sampling did not accept within " + std::to_string(max_rounds) + " rounds");
}

inline RejectionResult rejection_sample(const Graph& g, const ChainConfig& cfg, std::uint64_t max_rounds) {
    Rng rng(cfg.seed);
    return rejection_sample(g, cfg, max_rounds, rng);
}

} // namespace gbs
