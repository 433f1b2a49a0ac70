#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gbs/error.hpp"
#include "gbs/graph.hpp"
#include "gbs/rng.hpp"

namespace gbs {

/// Configuration of a single-loop matching chain.
struct ChainConfig {
    double lambda = 1.0;     // fugacity
    std::optional<double> c; // rescale parameter; when set lambda == c * c
    std::uint64_t steps = 0;
    std::uint64_t seed = 0;
    bool lazy = false;
    std::optional<Matching> initial; // empty matching when absent

    static ChainConfig with_c(double c, std::uint64_t steps = 0, std::uint64_t seed = 0) {
        ChainConfig cfg;
        cfg.c = c;
        cfg.lambda = c * c;
        cfg.steps = steps;
        cfg.seed = seed;
        return cfg;
    }

    void validate() const {
        if (!(lambda > 0.0)) throw ConfigError("fugacity lambda must be positive");
        if (c) {
            if (!(*c > 0.0)) throw ConfigError("rescale parameter c must be positive");
            if (lambda != *c * *c) throw ConfigError("lambda must equal c^2 when c is given");
        }
    }

    Matching start(const Graph& g) const {
        if (!initial) return Matching(g.n_vertices());
        if (!initial->is_matching_of(g)) throw ConfigError("initial state is not a matching of the graph");
        return *initial;
    }
};

enum class MoveKind { stay, add, remove, slide };

/// Proposal produced by one chosen edge: target state described relative to the
/// current matching, accepted with probability `accept`.
struct Move {
    MoveKind kind = MoveKind::stay;
    Edge added;   // add, slide
    Edge dropped; // remove, slide
    double accept = 0.0;
};

inline void apply_move(Matching& x, const Move& mv) {
    switch (mv.kind) {
    case MoveKind::stay:
        return;
    case MoveKind::add:
        x.add(mv.added.u, mv.added.v);
        return;
    case MoveKind::remove:
        x.remove(mv.dropped.u, mv.dropped.v);
        return;
    case MoveKind::slide:
        x.remove(mv.dropped.u, mv.dropped.v);
        x.add(mv.added.u, mv.added.v);
        return;
    }
}

inline double laziness(bool lazy) { return lazy ? 0.5 : 1.0; }

/// Glauber dynamics move for edge e: add w.p. lambda/(1+lambda) when e augments x,
/// remove w.p. 1/(1+lambda) when e is in x, otherwise stay.
inline Move glauber_move(const Matching& x, const Edge& e, double lambda, bool lazy) {
    Move mv;
    if (!x.covers(e.u) && !x.covers(e.v)) {
        mv.kind = MoveKind::add;
        mv.added = e;
        mv.accept = laziness(lazy) * lambda / (1.0 + lambda);
    } else if (x.contains(e)) {
        mv.kind = MoveKind::remove;
        mv.dropped = e;
        mv.accept = laziness(lazy) / (1.0 + lambda);
    }
    return mv;
}

/// Jerrum's chain: add, remove, or slide (when exactly one endpoint is covered),
/// with Metropolis acceptance min{1, lambda^(|M| - |x|)}.
///
/// When both endpoints of e are covered by different matching edges nothing happens.
inline Move jerrum_move(const Matching& x, const Edge& e, double lambda, bool lazy) {
    Move mv;
    const bool cu = x.covers(e.u), cv = x.covers(e.v);
    if (!cu && !cv) {
        mv.kind = MoveKind::add;
        mv.added = e;
        mv.accept = laziness(lazy) * std::min(1.0, lambda);
    } else if (x.contains(e)) {
        mv.kind = MoveKind::remove;
        mv.dropped = e;
        mv.accept = laziness(lazy) * std::min(1.0, 1.0 / lambda);
    } else if (cu != cv) {
        const Vertex shared = cu ? e.u : e.v;
        mv.kind = MoveKind::slide;
        mv.added = e;
        mv.dropped = Edge(shared, static_cast<Vertex>(x.mate(shared)));
        mv.accept = laziness(lazy);
    }
    return mv;
}

/// One step of the matching Glauber dynamics, in place.
inline void glauber_step_inplace(const Graph& g, Matching& x, double lambda, bool lazy, Rng& rng) {
    if (g.n_edges() == 0) return;
    const Edge& e = g.edge(rng.below(g.n_edges()));
    const Move mv = glauber_move(x, e, lambda, lazy);
    if (mv.kind != MoveKind::stay && rng.bernoulli(mv.accept)) apply_move(x, mv);
}

inline void jerrum_step_inplace(const Graph& g, Matching& x, double lambda, bool lazy, Rng& rng) {
    if (g.n_edges() == 0) return;
    const Edge& e = g.edge(rng.below(g.n_edges()));
    const Move mv = jerrum_move(x, e, lambda, lazy);
    if (mv.kind != MoveKind::stay && rng.bernoulli(mv.accept)) apply_move(x, mv);
}

inline Matching glauber_step(const Graph& g, Matching x, const ChainConfig& cfg, Rng& rng) {
    glauber_step_inplace(g, x, cfg.lambda, cfg.lazy, rng);
    return x;
}

inline Matching jerrum_step(const Graph& g, Matching x, const ChainConfig& cfg, Rng& rng) {
    jerrum_step_inplace(g, x, cfg.lambda, cfg.lazy, rng);
    return x;
}

// ---------------------------------------------------------------------------
// Exact one-step kernels

struct Transition {
    Matching target;
    double prob = 0.0;
};

/// Aggregates per-edge moves into the exact one-step distribution from x.
/// `move_of(e)` returns the Move for chosen edge e; each edge has mass 1/|E|.
template <class MoveFn>
std::vector<Transition> kernel_from_moves(const Graph& g, const Matching& x, MoveFn&& move_of) {
    std::map<std::string, Transition> acc;
    double stay = g.n_edges() == 0 ? 1.0 : 0.0;
    const double pe = g.n_edges() == 0 ? 0.0 : 1.0 / static_cast<double>(g.n_edges());
    for (const auto& e : g.edges()) {
        const Move mv = move_of(e);
        if (mv.kind == MoveKind::stay || mv.accept == 0.0) {
            stay += pe;
            continue;
        }
        Matching y = x;
        apply_move(y, mv);
        auto [it, inserted] = acc.try_emplace(y.key(), Transition{y, 0.0});
        it->second.prob += pe * mv.accept;
        stay += pe * (1.0 - mv.accept);
    }
    std::vector<Transition> out;
    out.reserve(acc.size() + 1);
    if (stay > 0.0) out.push_back({x, stay});
    for (auto& [k, t] : acc) out.push_back(std::move(t));
    return out;
}

inline std::vector<Transition> glauber_kernel(const Graph& g, const Matching& x, const ChainConfig& cfg) {
    return kernel_from_moves(g, x, [&](const Edge& e) { return glauber_move(x, e, cfg.lambda, cfg.lazy); });
}

inline std::vector<Transition> jerrum_kernel(const Graph& g, const Matching& x, const ChainConfig& cfg) {
    return kernel_from_moves(g, x, [&](const Edge& e) { return jerrum_move(x, e, cfg.lambda, cfg.lazy); });
}

// ---------------------------------------------------------------------------
// Running a chain

/// Outcome of a chain run. post_selected is the most recent visited state with
/// the requested number of edges; absent when the run never hit that size.
struct ChainTrace {
    Matching final;
    std::optional<Matching> post_selected;
    std::uint64_t step_of_post_selection = 0;
    std::string rng_state_out;

    bool starved() const { return !post_selected.has_value(); }
};

/// Runs `steps` applications of step(x, rng) from `initial`. States after each
/// step (1..steps) are candidates for post-selection.
template <class StepFn>
ChainTrace run_chain(Matching initial, std::uint64_t steps, StepFn&& step, Rng& rng,
                     std::optional<std::size_t> post_select_edges = std::nullopt) {
    ChainTrace trace;
    trace.final = std::move(initial);
    for (std::uint64_t t = 1; t <= steps; ++t) {
        step(trace.final, rng);
        if (post_select_edges && trace.final.size() == *post_select_edges) {
            trace.post_selected = trace.final;
            trace.step_of_post_selection = t;
        }
    }
    trace.rng_state_out = rng.state();
    return trace;
}

enum class ChainKind { glauber, jerrum };

/// Runs the single-loop chain described by cfg with its own seeded stream.
/// post_select_size counts vertices (must be even); the chain targets size/2 edges.
inline ChainTrace run_chain(const Graph& g, const ChainConfig& cfg, ChainKind kind,
                            std::optional<std::size_t> post_select_size = std::nullopt) {
    cfg.validate();
    if (post_select_size && (*post_select_size & 1))
        throw ConfigError("post-selection size must be even");
    Rng rng(cfg.seed);
    std::optional<std::size_t> edges;
    if (post_select_size) edges = *post_select_size / 2;
    const double lambda = cfg.lambda;
    const bool lazy = cfg.lazy;
    if (kind == ChainKind::glauber)
        return run_chain(cfg.start(g), cfg.steps,
                         [&](Matching& x, Rng& r) { glauber_step_inplace(g, x, lambda, lazy, r); }, rng, edges);
    return run_chain(cfg.start(g), cfg.steps,
                     [&](Matching& x, Rng& r) { jerrum_step_inplace(g, x, lambda, lazy, r); }, rng, edges);
}

} // namespace gbs
