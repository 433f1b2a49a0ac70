#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gbs/double_loop.hpp"
#include "gbs/error.hpp"
#include "gbs/graph.hpp"
#include "gbs/hafnian.hpp"
#include "gbs/matching_chain.hpp"
#include "gbs/rng.hpp"

namespace gbs {

enum class Objective { hafnian, density };
enum class SamplerKind { uniform, glauber, jerrum, double_loop };

inline const char* to_string(Objective o) { return o == Objective::hafnian ? "hafnian" : "density"; }

inline const char* to_string(SamplerKind s) {
    switch (s) {
    case SamplerKind::uniform: return "uniform";
    case SamplerKind::glauber: return "glauber";
    case SamplerKind::jerrum: return "jerrum";
    case SamplerKind::double_loop: return "double_loop";
    }
    return "?";
}

struct AnnealingConfig {
    double t0 = 1.0;
    double gamma = 0.95;
};

struct SolverConfig {
    Objective objective = Objective::hafnian;
    std::size_t k = 2;
    std::uint64_t iterations = 1000;
    SamplerKind sampler = SamplerKind::uniform;
    /// chain.chain.lambda and chain.chain.steps (the per-draw mixing budget) drive
    /// every chain sampler; the remaining fields only matter for the double loop.
    DoubleLoopConfig chain;
    std::optional<AnnealingConfig> sa;
    std::uint64_t seed = 0;
    bool warm_chain = true;        // keep the chain state across iterations
    std::uint64_t max_retries = 8; // extra chain draws after a starved one

    void validate(const Graph& g) const {
        if (k == 0) throw ConfigError("subgraph size k must be positive");
        if (k > g.n_vertices()) throw ConfigError("k exceeds the number of vertices");
        if (objective == Objective::hafnian && (k & 1)) throw ConfigError("hafnian objective needs an even k");
        if (sa) {
            if (!(sa->t0 > 0.0)) throw ConfigError("initial temperature must be positive");
            if (!(sa->gamma > 0.0 && sa->gamma < 1.0)) throw ConfigError("annealing parameter gamma must lie in (0,1)");
        }
        if (sampler != SamplerKind::uniform) {
            chain.validate();
            if (chain.chain.steps == 0) throw ConfigError("chain samplers need a positive mixing budget");
        }
    }
};

struct TrialRecord {
    SolverConfig config;
    std::optional<VertexSet> best_set;
    double best_score = 0.0;
    std::vector<double> score_trajectory; // running best after each iteration
    std::uint64_t evaluations = 0;        // objective evaluations
    std::uint64_t chain_draws = 0;        // successful post-selected draws
    std::uint64_t starvations = 0;        // draws that found no state of the target size
    std::uint64_t fallbacks = 0;          // iterations that fell back to a uniform resample
    std::uint64_t inner_failure_count = 0;
    double wall_time = 0.0; // seconds
};

inline double objective_value(const Graph& g, const VertexSet& s, Objective obj) {
    if (obj == Objective::density) return density(g, s);
    return hafnian(g, s).to_double();
}

/// Uniform k-subset of the vertices not in `exclude`, added to `out`.
inline void add_uniform_vertices(std::size_t n, std::size_t count, const Bitset& exclude, Bitset& out, Rng& rng) {
    std::vector<std::size_t> pool;
    pool.reserve(n);
    for (std::size_t v = 0; v < n; ++v)
        if (!exclude.test(v)) pool.push_back(v);
    if (count > pool.size()) throw ConfigError("not enough vertices to resample");
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.below(pool.size() - i);
        std::swap(pool[i], pool[j]);
        out.set(pool[i]);
    }
}

inline VertexSet uniform_subset(std::size_t n, std::size_t k, Rng& rng) {
    VertexSet s(n);
    add_uniform_vertices(n, k, Bitset(n), s.members, rng);
    return s;
}

/// Keeps `count` uniformly chosen members of `s`.
inline Bitset random_members(const Bitset& s, std::size_t count, Rng& rng) {
    auto idx = s.indices();
    Bitset out(s.size());
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.below(idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.set(idx[i]);
    }
    return out;
}

/// k-vertex sets drawn by post-selecting a matching chain at ceil(k/2) edges.
/// Odd k drops one uniformly chosen vertex from the post-selected set.
class ChainSubsetSampler {
public:
    ChainSubsetSampler(const Graph& g, const SolverConfig& cfg)
        : g_(g), cfg_(cfg), target_edges_((cfg.k + 1) / 2), state_(g.n_vertices()) {
        if (cfg.sampler == SamplerKind::double_loop) dl_.emplace(g, cfg.chain);
    }

    /// One post-selected draw over the configured budget; nullopt when the chain
    /// never reached the target size.
    std::optional<VertexSet> draw_once(Rng& rng) {
        if (!cfg_.warm_chain) state_ = Matching(g_.n_vertices());
        std::optional<Matching> hit;
        for (std::uint64_t t = 0; t < cfg_.chain.chain.steps; ++t) {
            step(rng);
            if (state_.size() == target_edges_) hit = state_;
        }
        if (!hit) {
            ++starvations_;
            return std::nullopt;
        }
        ++draws_;
        VertexSet s = hit->vertex_set();
        if (s.size() > cfg_.k) s.members.reset(s.list()[rng.below(s.size())]);
        return s;
    }

    /// draw_once with up to cfg.max_retries extra attempts.
    std::optional<VertexSet> draw(Rng& rng) {
        for (std::uint64_t a = 0; a <= cfg_.max_retries; ++a)
            if (auto s = draw_once(rng)) return s;
        return std::nullopt;
    }

    std::uint64_t draws() const { return draws_; }
    std::uint64_t starvations() const { return starvations_; }
    std::uint64_t inner_failures() const { return dl_ ? dl_->inner_failures() : 0; }

private:
    void step(Rng& rng) {
        const double lambda = cfg_.chain.chain.lambda;
        const bool lazy = cfg_.chain.chain.lazy;
        switch (cfg_.sampler) {
        case SamplerKind::glauber: glauber_step_inplace(g_, state_, lambda, lazy, rng); return;
        case SamplerKind::jerrum: jerrum_step_inplace(g_, state_, lambda, lazy, rng); return;
        case SamplerKind::double_loop: (*dl_)(state_, rng); return;
        case SamplerKind::uniform: throw ConfigError("uniform sampler has no chain");
        }
    }

    const Graph& g_;
    const SolverConfig& cfg_;
    std::size_t target_edges_;
    Matching state_;
    std::optional<DoubleLoopStepper> dl_;
    std::uint64_t draws_ = 0;
    std::uint64_t starvations_ = 0;
};

namespace detail {

struct TrialState {
    TrialRecord rec;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    double score(const Graph& g, const VertexSet& s) {
        ++rec.evaluations;
        return objective_value(g, s, rec.config.objective);
    }

    void offer(const VertexSet& s, double f) {
        if (f > rec.best_score || (!rec.best_set && rec.config.sa)) {
            rec.best_score = f;
            rec.best_set = s;
        }
    }

    TrialRecord finish(const ChainSubsetSampler* sampler) {
        if (sampler) {
            rec.chain_draws = sampler->draws();
            rec.starvations = sampler->starvations();
            rec.inner_failure_count = sampler->inner_failures();
        }
        rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return std::move(rec);
    }
};

inline TrialRecord random_search_impl(const Graph& g, const SolverConfig& cfg, bool enhanced) {
    cfg.validate(g);
    Rng rng(cfg.seed);
    TrialState st;
    st.rec.config = cfg;
    std::optional<ChainSubsetSampler> sampler;
    if (enhanced) sampler.emplace(g, st.rec.config);
    for (std::uint64_t i = 0; i < cfg.iterations; ++i) {
        std::optional<VertexSet> a;
        if (sampler) {
            a = sampler->draw(rng);
            if (!a) ++st.rec.fallbacks;
        }
        if (!a) a = uniform_subset(g.n_vertices(), cfg.k, rng);
        st.offer(*a, st.score(g, *a));
        st.rec.score_trajectory.push_back(st.rec.best_score);
    }
    return st.finish(sampler ? &*sampler : nullptr);
}

inline bool metropolis_accept(double f_new, double f_old, double t, Rng& rng) {
    if (f_new >= f_old) return true;
    return rng.bernoulli(std::exp((f_new - f_old) / t));
}

/// Neighbour of s that keeps m random members and adds k - m new ones. With a
/// chain sampler the new vertices come from a chain draw minus the kept set; the
/// chain is re-queried when too few remain and, after the retry bound, the
/// iteration falls back to a uniform resample (fell_back is set).
inline VertexSet sa_proposal(const Graph& g, const VertexSet& s, std::size_t m, ChainSubsetSampler* sampler,
                             const SolverConfig& cfg, Rng& rng, bool& fell_back) {
    const std::size_t n = g.n_vertices(), k = cfg.k;
    VertexSet r(n);
    r.members = random_members(s.members, m, rng);
    if (sampler) {
        for (std::uint64_t a = 0; a <= cfg.max_retries; ++a) {
            auto q = sampler->draw_once(rng);
            if (!q) continue;
            Bitset fresh = q->members;
            fresh -= r.members;
            if (fresh.count() < k - m) continue;
            r.members |= random_members(fresh, k - m, rng);
            return r;
        }
        fell_back = true;
    }
    const Bitset kept = r.members;
    add_uniform_vertices(n, k - m, kept, r.members, rng);
    return r;
}

inline TrialRecord annealing_impl(const Graph& g, const SolverConfig& cfg, bool enhanced) {
    cfg.validate(g);
    if (!cfg.sa) throw ConfigError("simulated annealing needs an annealing config");
    Rng rng(cfg.seed);
    TrialState st;
    st.rec.config = cfg;
    const std::size_t n = g.n_vertices(), k = cfg.k;
    std::optional<ChainSubsetSampler> sampler;
    if (enhanced) sampler.emplace(g, st.rec.config);

    std::optional<VertexSet> init;
    if (sampler) {
        init = sampler->draw(rng);
        if (!init) ++st.rec.fallbacks;
    }
    if (!init) init = uniform_subset(n, k, rng);
    VertexSet s = *init;
    double fs = st.score(g, s);
    st.offer(s, fs);
    double t = cfg.sa->t0;

    for (std::uint64_t i = 0; i < cfg.iterations; ++i) {
        const std::size_t m = rng.below(k);
        bool fell_back = false;
        VertexSet r = sa_proposal(g, s, m, sampler ? &*sampler : nullptr, cfg, rng, fell_back);
        st.rec.fallbacks += fell_back;
        const double fr = st.score(g, r);
        st.offer(r, fr);
        if (metropolis_accept(fr, fs, t, rng)) {
            s = std::move(r);
            fs = fr;
        }
        t *= cfg.sa->gamma;
        st.rec.score_trajectory.push_back(st.rec.best_score);
    }
    return st.finish(sampler ? &*sampler : nullptr);
}

} // namespace detail

/// N independent uniform k-subsets; strict improvement of the running best.
inline TrialRecord random_search(const Graph& g, const SolverConfig& cfg) {
    if (cfg.sampler != SamplerKind::uniform) throw ConfigError("random_search expects the uniform sampler");
    return detail::random_search_impl(g, cfg, false);
}

/// Random search whose k-subsets come from the configured chain.
inline TrialRecord enhanced_random_search(const Graph& g, const SolverConfig& cfg) {
    if (cfg.sampler == SamplerKind::uniform) throw ConfigError("enhanced_random_search needs a chain sampler");
    return detail::random_search_impl(g, cfg, true);
}

inline TrialRecord simulated_annealing(const Graph& g, const SolverConfig& cfg) {
    if (cfg.sampler != SamplerKind::uniform) throw ConfigError("simulated_annealing expects the uniform sampler");
    return detail::annealing_impl(g, cfg, false);
}

inline TrialRecord enhanced_simulated_annealing(const Graph& g, const SolverConfig& cfg) {
    if (cfg.sampler == SamplerKind::uniform) throw ConfigError("enhanced_simulated_annealing needs a chain sampler");
    return detail::annealing_impl(g, cfg, true);
}

/// Dispatches on cfg.sa and cfg.sampler.
inline TrialRecord run_solver(const Graph& g, const SolverConfig& cfg) {
    const bool enhanced = cfg.sampler != SamplerKind::uniform;
    if (cfg.sa) return detail::annealing_impl(g, cfg, enhanced);
    return detail::random_search_impl(g, cfg, enhanced);
}

struct Calibration {
    double c = 0.0;
    double mean_edges = 0.0; // pilot mean at the returned c
};

namespace detail {

// Mean matching size of a pilot run from the empty matching, or +inf once the
// state overshoots `ceiling` edges (large states make double-loop steps expensive).
inline double pilot_mean_edges(const Graph& g, SolverConfig cfg, double c, std::uint64_t steps,
                               std::size_t ceiling, std::uint64_t seed) {
    cfg.chain.chain.lambda = c * c;
    cfg.chain.chain.c.reset();
    cfg.chain.chain.steps = 1;
    cfg.warm_chain = true;
    cfg.k = 2;
    Rng rng(seed);
    Matching x(g.n_vertices());
    std::optional<DoubleLoopStepper> dl;
    if (cfg.sampler == SamplerKind::double_loop) dl.emplace(g, cfg.chain);
    double sum = 0.0;
    for (std::uint64_t t = 0; t < 2 * steps; ++t) {
        switch (cfg.sampler) {
        case SamplerKind::glauber: glauber_step_inplace(g, x, c * c, cfg.chain.chain.lazy, rng); break;
        case SamplerKind::jerrum: jerrum_step_inplace(g, x, c * c, cfg.chain.chain.lazy, rng); break;
        case SamplerKind::double_loop: (*dl)(x, rng); break;
        case SamplerKind::uniform: throw ConfigError("uniform sampler has no chain");
        }
        if (x.size() > ceiling) return std::numeric_limits<double>::infinity();
        if (t >= steps) sum += static_cast<double>(x.size());
    }
    return sum / static_cast<double>(steps);
}

} // namespace detail

/// Bisects log c so that the chain's equilibrium matching size is close to
/// `target_edges`. Used for reduced-size graphs, where the fugacities tuned for
/// 256 vertices put the chains far from the post-selection size.
inline Calibration calibrate_c(const Graph& g, const SolverConfig& cfg, std::size_t target_edges,
                               std::uint64_t seed, std::uint64_t pilot_steps = 20000, int rounds = 16) {
    if (cfg.sampler == SamplerKind::uniform) throw ConfigError("uniform sampler has no fugacity");
    if (target_edges == 0 || 2 * target_edges > g.n_vertices()) throw ConfigError("calibration target out of range");
    const std::size_t ceiling = 2 * target_edges + 2;
    double lo = std::log(1e-3), hi = std::log(4.0);
    Calibration best{std::exp(lo), 0.0};
    double best_gap = std::numeric_limits<double>::infinity();
    for (int r = 0; r < rounds; ++r) {
        const double mid = 0.5 * (lo + hi);
        const double m = detail::pilot_mean_edges(g, cfg, std::exp(mid), pilot_steps, ceiling, derive_seed(seed, r));
        const double gap = std::abs(m - static_cast<double>(target_edges));
        if (gap < best_gap) {
            best_gap = gap;
            best = {std::exp(mid), m};
        }
        (m < static_cast<double>(target_edges) ? lo : hi) = mid;
    }
    return best;
}

/// enhanced / plain with 0/0 = 1 and x/0 = +inf for x > 0.
inline double score_ratio(double enhanced, double plain) {
    if (plain == 0.0) return enhanced == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return enhanced / plain;
}

struct AdvantagePoint {
    std::size_t k = 0;
    double plain_mean = 0.0;
    double enhanced_mean = 0.0;
    double ratio = 1.0;
};

/// Mean best score per k for the two configs over seeds derive_seed(seed, i),
/// i < n_seeds, and their ratio. Both configs keep their own iteration budgets.
inline std::vector<AdvantagePoint> score_advantage(const Graph& g, const SolverConfig& plain,
                                                   const SolverConfig& enhanced,
                                                   const std::vector<std::size_t>& k_range, std::size_t n_seeds,
                                                   std::uint64_t seed) {
    std::vector<AdvantagePoint> out;
    for (std::size_t k : k_range) {
        AdvantagePoint pt;
        pt.k = k;
        for (std::size_t i = 0; i < n_seeds; ++i) {
            SolverConfig a = plain, b = enhanced;
            a.k = b.k = k;
            a.seed = b.seed = derive_seed(seed, i);
            pt.plain_mean += run_solver(g, a).best_score;
            pt.enhanced_mean += run_solver(g, b).best_score;
        }
        pt.plain_mean /= static_cast<double>(n_seeds);
        pt.enhanced_mean /= static_cast<double>(n_seeds);
        pt.ratio = score_ratio(pt.enhanced_mean, pt.plain_mean);
        out.push_back(pt);
    }
    return out;
}

} // namespace gbs
