#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "gbs/double_loop.hpp"
#include "gbs/error.hpp"
#include "gbs/generators.hpp"
#include "gbs/graph.hpp"
#include "gbs/hafnian.hpp"
#include "gbs/matching_chain.hpp"
#include "gbs/pm_sampler.hpp"
#include "gbs/rng.hpp"

namespace gbs {

enum class StateKind { matching, vertex_set };

/// Probability mass over canonically encoded states (Matching::key or
/// VertexSet::to_hex), sorted by encoding.
class DistributionTable {
public:
    DistributionTable() = default;

    /// Normalizes exact non-negative weights; keeps the exact rationals.
    static DistributionTable from_weights(StateKind kind, std::map<std::string, Rational> weights) {
        DistributionTable t;
        t.kind_ = kind;
        Rational total = 0;
        for (const auto& [k, w] : weights) {
            if (w < 0) throw ConfigError("negative weight in distribution");
            total += w;
        }
        if (total == 0) throw ConfigError("distribution has zero total weight");
        std::vector<Rational> exact;
        for (auto& [k, w] : weights) {
            t.support_.push_back(k);
            exact.push_back(w / total);
            t.mass_.push_back(exact.back().convert_to<double>());
        }
        t.exact_ = std::move(exact);
        return t;
    }

    static DistributionTable from_counts(StateKind kind, const std::map<std::string, std::uint64_t>& counts) {
        DistributionTable t;
        t.kind_ = kind;
        std::uint64_t total = 0;
        for (const auto& [k, c] : counts) total += c;
        if (total == 0) throw ConfigError("empirical distribution has no samples");
        for (const auto& [k, c] : counts) {
            t.support_.push_back(k);
            t.mass_.push_back(static_cast<double>(c) / static_cast<double>(total));
        }
        return t;
    }

    static DistributionTable from_masses(StateKind kind, std::map<std::string, double> masses) {
        DistributionTable t;
        t.kind_ = kind;
        double total = 0.0;
        for (const auto& [k, m] : masses) {
            if (m < 0.0) throw ConfigError("negative mass in distribution");
            total += m;
        }
        if (std::abs(total - 1.0) > 1e-12) throw ConfigError("distribution masses do not sum to 1");
        for (const auto& [k, m] : masses) {
            t.support_.push_back(k);
            t.mass_.push_back(m);
        }
        return t;
    }

    StateKind kind() const { return kind_; }
    const std::vector<std::string>& support() const { return support_; }
    const std::vector<double>& mass() const { return mass_; }
    const std::optional<std::vector<Rational>>& exact() const { return exact_; }
    std::size_t size() const { return support_.size(); }

    double prob(const std::string& key) const {
        auto it = std::lower_bound(support_.begin(), support_.end(), key);
        if (it == support_.end() || *it != key) return 0.0;
        return mass_[static_cast<std::size_t>(it - support_.begin())];
    }

    std::optional<Rational> exact_prob(const std::string& key) const {
        if (!exact_) return std::nullopt;
        auto it = std::lower_bound(support_.begin(), support_.end(), key);
        if (it == support_.end() || *it != key) return Rational(0);
        return (*exact_)[static_cast<std::size_t>(it - support_.begin())];
    }

    /// CSV with header "state_encoding,probability".
    void write_csv(std::ostream& out) const {
        out << "state_encoding,probability\n";
        char buf[64];
        for (std::size_t i = 0; i < support_.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", mass_[i]);
            out << support_[i] << ',' << buf << '\n';
        }
    }

private:
    StateKind kind_ = StateKind::matching;
    std::vector<std::string> support_;
    std::vector<double> mass_;
    std::optional<std::vector<Rational>> exact_;
};

/// Half the L1 distance; supports are unioned with zero fill.
inline double tv_distance(const DistributionTable& p, const DistributionTable& q) {
    const auto& ks = p.support();
    const auto& kq = q.support();
    double sum = 0.0;
    std::size_t i = 0, j = 0;
    while (i < ks.size() || j < kq.size()) {
        if (j == kq.size() || (i < ks.size() && ks[i] < kq[j])) {
            sum += p.mass()[i++];
        } else if (i == ks.size() || kq[j] < ks[i]) {
            sum += q.mass()[j++];
        } else {
            sum += std::abs(p.mass()[i++] - q.mass()[j++]);
        }
    }
    return std::min(1.0, 0.5 * sum);
}

enum class StationaryLaw {
    matching_single,  // lambda^|X|
    matching_double,  // lambda^(2|X|) Haf(G_X) w(X)
    vertexset_single, // lambda^(|S|/2) Haf(S), i.e. c^|S| Haf(S) with lambda = c^2
    vertexset_double, // lambda^|S| Haf(S)^2, i.e. c^(2|S|) Haf(S)^2
};

inline constexpr std::size_t kMatchingLawMaxVertices = 12;
inline constexpr std::size_t kVertexSetLawMaxVertices = 14;

namespace detail {

inline Rational rational_pow(const Rational& base, std::size_t e) {
    Rational r = 1;
    for (std::size_t i = 0; i < e; ++i) r *= base;
    return r;
}

inline Rational exact_matching_weight(const Graph& g, const Matching& m) {
    Rational w = 1;
    if (!g.weighted()) return w;
    for (const auto& e : m.edges()) w *= exact_rational(g.weight(e.u, e.v));
    return w;
}

} // namespace detail

/// Exact stationary law by brute force, in rational arithmetic.
///
/// The single-loop laws ignore edge weights (the single-loop chains do); the
/// double laws use the weighted Hafnian when the graph carries weights.
inline DistributionTable exact_stationary(const Graph& g, double lambda, StationaryLaw law,
                                          std::size_t enumeration_cap = 2'000'000) {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    const Rational lam = exact_rational(lambda);
    const bool matching_law = law == StationaryLaw::matching_single || law == StationaryLaw::matching_double;
    if (matching_law && g.n_vertices() > kMatchingLawMaxVertices)
        throw GuardExceeded("matching laws are limited to " + std::to_string(kMatchingLawMaxVertices) + " vertices");
    if (!matching_law && g.n_vertices() > kVertexSetLawMaxVertices)
        throw GuardExceeded("vertex-set laws are limited to " + std::to_string(kVertexSetLawMaxVertices) + " vertices");

    std::map<std::string, Rational> weights;
    if (matching_law) {
        EnumerationLimits lim;
        lim.cap = enumeration_cap;
        for (const auto& x : enumerate_matchings(g, lim)) {
            Rational w;
            if (law == StationaryLaw::matching_single) {
                w = detail::rational_pow(lam, x.size());
            } else {
                w = detail::rational_pow(lam, 2 * x.size()) * hafnian_rational(g, x.vertex_set()) *
                    detail::exact_matching_weight(g, x);
            }
            if (w != 0) weights.emplace(x.key(), w);
        }
        return DistributionTable::from_weights(StateKind::matching, std::move(weights));
    }

    const std::size_t n = g.n_vertices();
    const Graph unweighted(n, g.edges());
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        if (std::popcount(mask) & 1) continue;
        VertexSet s(n);
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1U) s.members.set(i);
        const std::size_t k = s.size();
        Rational w;
        if (law == StationaryLaw::vertexset_single) {
            w = detail::rational_pow(lam, k / 2) * hafnian_rational(unweighted, s);
        } else {
            const Rational h = hafnian_rational(g, s);
            w = detail::rational_pow(lam, k) * h * h;
        }
        if (w != 0) weights.emplace(s.to_hex(), w);
    }
    return DistributionTable::from_weights(StateKind::vertex_set, std::move(weights));
}

/// Aggregates a matching law onto vertex sets via S = V(X), exactly when possible.
inline DistributionTable aggregate_to_vertex_sets(const DistributionTable& law, std::size_t n_vertices) {
    if (law.kind() != StateKind::matching) throw ConfigError("aggregation expects a matching law");
    const auto key_to_set = [&](const std::string& key) {
        VertexSet s(n_vertices);
        if (key == "-") return s;
        std::size_t pos = 0;
        while (pos < key.size()) {
            const auto dot = key.find('.', pos);
            const std::string tok = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
            const auto dash = tok.find('-');
            s.members.set(std::stoul(tok.substr(0, dash)));
            s.members.set(std::stoul(tok.substr(dash + 1)));
            if (dot == std::string::npos) break;
            pos = dot + 1;
        }
        return s;
    };
    if (law.exact()) {
        std::map<std::string, Rational> agg;
        for (std::size_t i = 0; i < law.size(); ++i) agg[key_to_set(law.support()[i]).to_hex()] += (*law.exact())[i];
        return DistributionTable::from_weights(StateKind::vertex_set, std::move(agg));
    }
    std::map<std::string, double> agg;
    for (std::size_t i = 0; i < law.size(); ++i) agg[key_to_set(law.support()[i]).to_hex()] += law.mass()[i];
    return DistributionTable::from_masses(StateKind::vertex_set, std::move(agg));
}

using KernelFn = std::function<std::vector<Transition>(const Matching&)>;

/// max over state pairs of |pi(X) P(X,Y) - pi(Y) P(Y,X)|, plus the worst row-sum
/// error of the kernel. Mass leaking outside `states` counts as violation.
inline double check_detailed_balance(const std::vector<Matching>& states, const KernelFn& kernel,
                                     const DistributionTable& law) {
    if (law.kind() != StateKind::matching) throw ConfigError("detailed balance needs a matching law");
    std::map<std::pair<std::string, std::string>, double> flow;
    double worst = 0.0;
    for (const auto& x : states) {
        const std::string kx = x.key();
        const double px = law.prob(kx);
        double row = 0.0;
        for (const auto& t : kernel(x)) {
            row += t.prob;
            const std::string ky = t.target.key();
            if (ky != kx) flow[{kx, ky}] += px * t.prob;
        }
        worst = std::max(worst, std::abs(row - 1.0));
    }
    for (const auto& [edge, f] : flow) {
        auto it = flow.find({edge.second, edge.first});
        const double back = it == flow.end() ? 0.0 : it->second;
        worst = std::max(worst, std::abs(f - back));
    }
    return worst;
}

/// Perfect and near-perfect matchings of g: the state space of the inner chain.
inline std::vector<Matching> pm_state_space(const Graph& g) {
    std::vector<Matching> out;
    if (g.n_vertices() & 1) return out;
    const std::size_t n = g.n_vertices() / 2;
    EnumerationLimits lim;
    lim.max_size = n;
    for (auto& m : enumerate_matchings(g, lim))
        if (m.size() + 1 >= n) out.push_back(std::move(m));
    return out;
}

/// Law over pm_state_space proportional to w(M) (uniform when unweighted).
inline DistributionTable pm_state_law(const Graph& g) {
    std::map<std::string, Rational> w;
    for (const auto& m : pm_state_space(g)) w.emplace(m.key(), detail::exact_matching_weight(g, m));
    return DistributionTable::from_weights(StateKind::matching, std::move(w));
}

// ---------------------------------------------------------------------------
// Empirical diagnostics

inline std::string encode_state(const Matching& x, StateKind kind) {
    return kind == StateKind::matching ? x.key() : x.vertex_set().to_hex();
}

/// Runs fn(i) for i in [0, n) across `threads` workers. Each index owns its output
/// slot, so results do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += threads) fn(i);
        });
    for (auto& t : pool) t.join();
}

struct MixingPoint {
    std::uint64_t step = 0;
    double tv = 0.0;
};

/// Empirical TV between the replica ensemble at each checkpoint and `law`.
///
/// make_stepper() must return a fresh step functor (Matching&, Rng&) per replica;
/// replica r uses derive_seed(seed, r).
template <class StepperFactory>
std::vector<MixingPoint> mixing_curve(const Matching& start, StepperFactory&& make_stepper,
                                      const DistributionTable& law, std::vector<std::uint64_t> checkpoints,
                                      std::size_t replicas, std::uint64_t seed, unsigned threads = 1) {
    std::sort(checkpoints.begin(), checkpoints.end());
    std::vector<std::vector<std::string>> states(replicas);
    parallel_for(replicas, threads, [&](std::size_t r) {
        Rng rng(derive_seed(seed, r));
        auto step = make_stepper();
        Matching x = start;
        std::uint64_t t = 0;
        for (auto cp : checkpoints) {
            for (; t < cp; ++t) step(x, rng);
            states[r].push_back(encode_state(x, law.kind()));
        }
    });
    std::vector<MixingPoint> out;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        std::map<std::string, std::uint64_t> counts;
        for (std::size_t r = 0; r < replicas; ++r) ++counts[states[r][c]];
        out.push_back({checkpoints[c], tv_distance(DistributionTable::from_counts(law.kind(), counts), law)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Hard-instance escape time

struct ExitTimeResult {
    std::size_t n_squares = 0;
    double lambda = 0.0;
    std::vector<std::uint64_t> exit_steps; // first step at which M_0 loses an edge
    std::uint64_t censored = 0;            // trials that hit max_steps
    double mean = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;  // mean -/+ 1.96 standard errors
    double ci_high = 0.0;
    double expected_mean = 0.0;    // 3 (1 + 2^n) (1 + lambda^2)
    double exit_probability = 0.0; // 1 / expected_mean
};

/// Per-step probability that the double loop, sitting at M_0 of hard_instance(n),
/// removes an edge: (1/3) * 1/(1 + 2^n) * 1/(1 + lambda^2).
inline double hard_instance_exit_probability(std::size_t n_squares, double lambda) {
    return (1.0 / 3.0) * (1.0 / (1.0 + std::ldexp(1.0, static_cast<int>(n_squares)))) / (1.0 + lambda * lambda);
}

inline ExitTimeResult exit_time_experiment(std::size_t n_squares, double lambda, std::size_t trials,
                                           std::uint64_t seed, InnerSampler inner = InnerSampler::exact,
                                           std::uint64_t max_steps = 100'000'000, unsigned threads = 1) {
    const Graph g = gen_graph(GeneratorSpec::hard_instance(n_squares), 0);
    const Matching m0 = hard_instance_m0(n_squares);
    DoubleLoopConfig cfg;
    cfg.chain.lambda = lambda;
    cfg.inner = inner;
    ExitTimeResult out;
    out.n_squares = n_squares;
    out.lambda = lambda;
    out.exit_probability = hard_instance_exit_probability(n_squares, lambda);
    out.expected_mean = 1.0 / out.exit_probability;
    out.exit_steps.assign(trials, 0);
    std::vector<char> censored(trials, 0);
    parallel_for(trials, threads, [&](std::size_t i) {
        Rng rng(derive_seed(seed, i));
        DoubleLoopStepper step(g, cfg);
        Matching x = m0;
        std::uint64_t t = 0;
        while (t < max_steps && x.size() == m0.size()) {
            step(x, rng);
            ++t;
        }
        out.exit_steps[i] = t;
        censored[i] = x.size() == m0.size();
    });
    for (char c : censored) out.censored += static_cast<std::uint64_t>(c);
    double sum = 0.0, sq = 0.0;
    for (auto t : out.exit_steps) sum += static_cast<double>(t);
    const double n = static_cast<double>(std::max<std::size_t>(trials, 1));
    out.mean = sum / n;
    for (auto t : out.exit_steps) sq += (static_cast<double>(t) - out.mean) * (static_cast<double>(t) - out.mean);
    const double sd = trials > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
    out.std_error = sd / std::sqrt(n);
    out.ci_low = out.mean - 1.96 * out.std_error;
    out.ci_high = out.mean + 1.96 * out.std_error;
    return out;
}

struct GoodnessOfFit {
    double chi_square = 0.0;
    std::size_t dof = 0;
    double p_value = 1.0;
    std::size_t bins = 0;
};

/// Pearson chi-square test of samples (support 1, 2, ...) against Geometric(p).
/// Bins are runs of consecutive values cut at the geometric quantiles, at most
/// 20 of them, merged until each expects at least `min_expected` counts; the
/// last bin is the tail.
inline GoodnessOfFit geometric_goodness_of_fit(const std::vector<std::uint64_t>& samples, double p,
                                               double min_expected = 5.0) {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("geometric parameter must lie in (0,1]");
    const double n = static_cast<double>(samples.size());
    const auto cdf = [&](double e) { return p == 1.0 ? 1.0 : 1.0 - std::pow(1.0 - p, e); };
    const std::size_t target = std::min<std::size_t>(20, static_cast<std::size_t>(n / min_expected));
    std::vector<double> edges; // inclusive upper ends; the tail bin has none
    for (std::size_t j = 1; j < target && p < 1.0; ++j) {
        const double e = std::max(1.0, std::ceil(std::log1p(-static_cast<double>(j) / target) / std::log1p(-p)));
        if (edges.empty() || e > edges.back()) edges.push_back(e);
    }
    // merge forward until every bin (tail included) meets the expected count
    std::vector<double> kept;
    double lo = 0.0;
    for (double e : edges) {
        if (n * (cdf(e) - cdf(lo)) >= min_expected && n * (1.0 - cdf(e)) >= min_expected) {
            kept.push_back(e);
            lo = e;
        }
    }
    std::vector<double> expected;
    lo = 0.0;
    for (double e : kept) {
        expected.push_back(n * (cdf(e) - cdf(lo)));
        lo = e;
    }
    expected.push_back(n * (1.0 - cdf(lo)));
    std::vector<double> observed(expected.size(), 0.0);
    for (auto s : samples) {
        const auto it = std::lower_bound(kept.begin(), kept.end(), static_cast<double>(s));
        observed[static_cast<std::size_t>(it - kept.begin())] += 1.0;
    }
    GoodnessOfFit out;
    out.bins = expected.size();
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const double d = observed[i] - expected[i];
        out.chi_square += d * d / expected[i];
    }
    if (expected.size() < 2) return out;
    out.dof = expected.size() - 1;
    const boost::math::chi_squared dist(static_cast<double>(out.dof));
    out.p_value = boost::math::cdf(boost::math::complement(dist, out.chi_square));
    return out;
}

} // namespace gbs
