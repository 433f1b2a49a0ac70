#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbs/bench/csv.hpp"
#include "gbs/bench/stats.hpp"
#include "gbs/bench/svg.hpp"
#include "gbs/diagnostics.hpp"
#include "gbs/error.hpp"
#include "gbs/generators.hpp"
#include "gbs/solvers.hpp"

namespace gbs::bench {

using json = nlohmann::json;

// Process exit statuses shared by the CLI and the bench runner.
enum ExitStatus : int {
    exit_ok = 0,
    exit_other = 1,
    exit_config = 2,
    exit_starvation = 3,
    exit_inner_budget = 4,
    exit_guard = 5,
};

inline int exit_status(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return exit_config;
    if (dynamic_cast<const StarvationError*>(&e)) return exit_starvation;
    if (dynamic_cast<const InnerBudgetExhausted*>(&e)) return exit_inner_budget;
    if (dynamic_cast<const GuardExceeded*>(&e)) return exit_guard;
    return exit_other;
}

// ---------------------------------------------------------------------------
// Enum names

inline SamplerKind parse_sampler(const std::string& s) {
    if (s == "uniform") return SamplerKind::uniform;
    if (s == "glauber") return SamplerKind::glauber;
    if (s == "jerrum") return SamplerKind::jerrum;
    if (s == "double-loop" || s == "double_loop") return SamplerKind::double_loop;
    throw ConfigError("unknown sampler '" + s + "'");
}

inline std::string sampler_name(SamplerKind s) {
    return s == SamplerKind::double_loop ? "double-loop" : to_string(s);
}

inline Objective parse_objective(const std::string& s) {
    if (s == "hafnian") return Objective::hafnian;
    if (s == "density") return Objective::density;
    throw ConfigError("unknown objective '" + s + "'");
}

inline InnerSampler parse_inner(const std::string& s) {
    if (s == "chain") return InnerSampler::chain;
    if (s == "exact") return InnerSampler::exact;
    if (s == "counting") return InnerSampler::counting;
    if (s == "adaptive") return InnerSampler::adaptive;
    throw ConfigError("unknown inner sampler '" + s + "'");
}

inline std::string inner_name(InnerSampler s) {
    switch (s) {
    case InnerSampler::chain: return "chain";
    case InnerSampler::exact: return "exact";
    case InnerSampler::counting: return "counting";
    case InnerSampler::adaptive: return "adaptive";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Strict JSON reading

namespace detail {

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ConfigError("unknown field '" + k + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, const std::string& where, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("field '" + std::string(key) + "' in " + where + " has the wrong type");
    }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError("missing field '" + std::string(key) + "' in " + where);
    return get_or<T>(j, key, where, T{});
}

inline std::size_t get_count(const json& j, const char* key, const std::string& where, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("field '" + std::string(key) + "' in " + where + " must be a non-negative integer");
    return v.get<std::size_t>();
}

} // namespace detail

inline json graph_to_json(const GeneratorSpec& s, std::uint64_t seed) {
    json j;
    switch (s.kind) {
    case GeneratorKind::planted_clique: j = {{"family", "planted-clique"}, {"n", s.n}, {"clique", s.clique_size}, {"p", s.p}}; break;
    case GeneratorKind::decreasing_degree: j = {{"family", "decreasing-degree"}, {"n", s.n}}; break;
    case GeneratorKind::erdos_renyi: j = {{"family", "er"}, {"n", s.n}, {"p", s.p}}; break;
    case GeneratorKind::random_bipartite: j = {{"family", "bipartite"}, {"side", s.n}, {"p", s.p}}; break;
    case GeneratorKind::sparse_bipartite: j = {{"family", "sparse-bipartite"}, {"side", s.n}, {"edges", s.n_edges}}; break;
    case GeneratorKind::complete: j = {{"family", "complete"}, {"n", s.n}}; break;
    case GeneratorKind::complete_bipartite: j = {{"family", "complete-bipartite"}, {"n", s.n}, {"m", s.m}}; break;
    case GeneratorKind::hard_instance: j = {{"family", "hard-instance"}, {"squares", s.n_squares}}; break;
    }
    j["seed"] = seed;
    return j;
}

inline GeneratorSpec graph_from_json(const json& j, std::uint64_t& seed) {
    using namespace detail;
    const std::string w = "graph";
    check_keys(j, w, {"family", "n", "m", "p", "clique", "side", "edges", "squares", "seed"});
    const auto family = require<std::string>(j, "family", w);
    seed = get_or<std::uint64_t>(j, "seed", w, 1);
    if (family == "planted-clique")
        return GeneratorSpec::planted_clique(get_count(j, "n", w, 0), get_count(j, "clique", w, 0),
                                             require<double>(j, "p", w));
    if (family == "decreasing-degree") return GeneratorSpec::decreasing_degree(get_count(j, "n", w, 0));
    if (family == "er") return GeneratorSpec::erdos_renyi(get_count(j, "n", w, 0), require<double>(j, "p", w));
    if (family == "bipartite") return GeneratorSpec::random_bipartite(get_count(j, "side", w, 0), require<double>(j, "p", w));
    if (family == "sparse-bipartite")
        return GeneratorSpec::sparse_bipartite(get_count(j, "side", w, 0), get_count(j, "edges", w, 0));
    if (family == "complete") return GeneratorSpec::complete(get_count(j, "n", w, 0));
    if (family == "complete-bipartite")
        return GeneratorSpec::complete_bipartite(get_count(j, "n", w, 0), get_count(j, "m", w, 0));
    if (family == "hard-instance") return GeneratorSpec::hard_instance(get_count(j, "squares", w, 0));
    throw ConfigError("unknown graph family '" + family + "'");
}

// ---------------------------------------------------------------------------
// Experiment specification

enum class Task { solve, score_advantage, exit_time };

inline std::string task_name(Task t) {
    switch (t) {
    case Task::solve: return "solve";
    case Task::score_advantage: return "score-advantage";
    case Task::exit_time: return "exit-time";
    }
    return "?";
}

struct SolveBlock {
    bool annealing = false;
    Objective objective = Objective::hafnian;
    std::size_t k = 2;
    std::vector<std::size_t> k_values; // score-advantage grid
    std::uint64_t iterations = 1000;
    std::vector<SamplerKind> samplers; // enhanced variants; the uniform baseline always runs
    std::optional<double> c;           // absent: calibrated per sampler and k
    std::uint64_t mixing = 1000;
    double t0 = 1.0;
    double gamma = 0.95;
    InnerSampler inner = InnerSampler::adaptive;
    bool warm = true;
    std::uint64_t max_retries = 8;
};

struct ExitBlock {
    std::size_t squares = 4;
    double lambda = 1.0;
    std::size_t trials = 200;
    std::uint64_t max_steps = 100'000'000;
};

struct ExperimentSpec {
    std::string name = "experiment";
    Task task = Task::solve;
    GeneratorSpec graph = GeneratorSpec::complete(4);
    std::uint64_t graph_seed = 1;
    std::uint64_t seed = 0;
    std::size_t seeds = 10;
    unsigned threads = 1;
    SolveBlock solve;
    ExitBlock exit;

    void validate() const {
        if (name.empty() || name.find_first_of("/\\,") != std::string::npos)
            throw ConfigError("experiment name must be non-empty and free of '/', '\\' and ','");
        if (threads == 0) throw ConfigError("threads must be positive");
        if (task == Task::exit_time) {
            if (exit.squares < 2) throw ConfigError("exit-time needs at least 2 squares");
            if (!(exit.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
            if (exit.trials == 0) throw ConfigError("exit-time needs at least one trial");
            return;
        }
        if (seeds == 0) throw ConfigError("seeds must be positive");
        if (!(solve.gamma > 0.0 && solve.gamma < 1.0)) throw ConfigError("gamma must lie in (0,1)");
        if (!(solve.t0 > 0.0)) throw ConfigError("t0 must be positive");
        if (solve.c && !(*solve.c > 0.0)) throw ConfigError("c must be positive");
        if (solve.mixing == 0) throw ConfigError("mixing budget must be positive");
        for (auto s : solve.samplers)
            if (s == SamplerKind::uniform) throw ConfigError("list only chain samplers; the uniform baseline is implicit");
        if (task == Task::score_advantage) {
            if (solve.k_values.empty()) throw ConfigError("score-advantage needs a k grid");
            if (solve.samplers.empty()) throw ConfigError("score-advantage needs an enhanced sampler");
            for (auto k : solve.k_values)
                if (k == 0 || (solve.objective == Objective::hafnian && (k & 1)))
                    throw ConfigError("k values must be positive (and even for the hafnian)");
        } else if (solve.k == 0 || (solve.objective == Objective::hafnian && (solve.k & 1))) {
            throw ConfigError("k must be positive (and even for the hafnian)");
        }
    }

    json to_json() const {
        json j;
        j["name"] = name;
        j["task"] = task_name(task);
        j["graph"] = graph_to_json(graph, graph_seed);
        j["seed"] = seed;
        j["threads"] = threads;
        if (task == Task::exit_time) {
            j["exit_time"] = {{"squares", exit.squares}, {"lambda", exit.lambda}, {"trials", exit.trials},
                              {"max_steps", exit.max_steps}};
            return j;
        }
        j["seeds"] = seeds;
        json s;
        s["algorithm"] = solve.annealing ? "sa" : "rs";
        s["objective"] = to_string(solve.objective);
        if (task == Task::score_advantage)
            s["k_values"] = solve.k_values;
        else
            s["k"] = solve.k;
        s["iterations"] = solve.iterations;
        std::vector<std::string> names;
        for (auto v : solve.samplers) names.push_back(sampler_name(v));
        s["samplers"] = names;
        if (solve.c) s["c"] = *solve.c;
        s["mixing"] = solve.mixing;
        s["t0"] = solve.t0;
        s["gamma"] = solve.gamma;
        s["inner"] = inner_name(solve.inner);
        s["warm"] = solve.warm;
        s["max_retries"] = solve.max_retries;
        j["solve"] = s;
        return j;
    }

    static ExperimentSpec from_json(const json& j) {
        using namespace detail;
        check_keys(j, "experiment", {"name", "task", "graph", "seed", "seeds", "threads", "solve", "exit_time"});
        ExperimentSpec e;
        e.name = get_or<std::string>(j, "name", "experiment", e.name);
        const auto task = require<std::string>(j, "task", "experiment");
        if (task == "solve")
            e.task = Task::solve;
        else if (task == "score-advantage")
            e.task = Task::score_advantage;
        else if (task == "exit-time")
            e.task = Task::exit_time;
        else
            throw ConfigError("unknown task '" + task + "'");
        e.seed = get_or<std::uint64_t>(j, "seed", "experiment", 0);
        e.seeds = get_count(j, "seeds", "experiment", 10);
        e.threads = static_cast<unsigned>(get_count(j, "threads", "experiment", 1));
        if (e.task == Task::exit_time) {
            if (j.contains("solve")) throw ConfigError("exit-time experiments take no solve block");
            const json x = j.value("exit_time", json::object());
            check_keys(x, "exit_time", {"squares", "lambda", "trials", "max_steps"});
            e.exit.squares = get_count(x, "squares", "exit_time", e.exit.squares);
            e.exit.lambda = get_or<double>(x, "lambda", "exit_time", e.exit.lambda);
            e.exit.trials = get_count(x, "trials", "exit_time", e.exit.trials);
            e.exit.max_steps = get_count(x, "max_steps", "exit_time", e.exit.max_steps);
            e.graph = GeneratorSpec::hard_instance(e.exit.squares);
            e.graph_seed = 0;
            e.validate();
            return e;
        }
        if (j.contains("exit_time")) throw ConfigError("only exit-time experiments take an exit_time block");
        if (!j.contains("graph")) throw ConfigError("missing field 'graph' in experiment");
        e.graph = graph_from_json(j.at("graph"), e.graph_seed);
        const std::string w = "solve";
        if (!j.contains("solve")) throw ConfigError("missing field 'solve' in experiment");
        const json& s = j.at("solve");
        check_keys(s, w, {"algorithm", "objective", "k", "k_values", "iterations", "samplers", "c", "mixing", "t0",
                          "gamma", "inner", "warm", "max_retries"});
        const auto alg = get_or<std::string>(s, "algorithm", w, "rs");
        if (alg != "rs" && alg != "sa") throw ConfigError("algorithm must be 'rs' or 'sa'");
        e.solve.annealing = alg == "sa";
        e.solve.objective = parse_objective(require<std::string>(s, "objective", w));
        if (e.task == Task::score_advantage) {
            if (s.contains("k")) throw ConfigError("score-advantage takes k_values, not k");
            e.solve.k_values = require<std::vector<std::size_t>>(s, "k_values", w);
            e.solve.iterations = 100;
        } else {
            if (s.contains("k_values")) throw ConfigError("k_values is only valid for score-advantage");
            e.solve.k = get_count(s, "k", w, 0);
        }
        e.solve.iterations = get_count(s, "iterations", w, e.solve.iterations);
        for (const auto& name : get_or<std::vector<std::string>>(s, "samplers", w, {}))
            e.solve.samplers.push_back(parse_sampler(name));
        if (s.contains("c")) e.solve.c = get_or<double>(s, "c", w, 0.0);
        e.solve.mixing = get_count(s, "mixing", w, e.solve.mixing);
        e.solve.t0 = get_or<double>(s, "t0", w, e.solve.t0);
        e.solve.gamma = get_or<double>(s, "gamma", w, e.solve.gamma);
        e.solve.inner = parse_inner(get_or<std::string>(s, "inner", w, "adaptive"));
        e.solve.warm = get_or<bool>(s, "warm", w, true);
        e.solve.max_retries = get_count(s, "max_retries", w, e.solve.max_retries);
        e.validate();
        return e;
    }
};

// ---------------------------------------------------------------------------
// Named figure protocols, sized by `scale` (the vertex count; 256 is full size)

struct ScaledSizes {
    std::size_t n, clique, k_hafnian, k_density;
};

/// Vertex counts shrink linearly with scale. The hafnian target size and the
/// planted clique shrink with its square root so that the hafnian stays
/// nontrivial; scale 64 gives clique and k equal to 8 and a density k of 20.
inline ScaledSizes scaled_sizes(std::size_t scale) {
    if (scale < 16 || scale % 4 != 0) throw ConfigError("scale must be a multiple of 4 and at least 16");
    const double f = static_cast<double>(scale) / 256.0;
    ScaledSizes s;
    s.n = scale;
    s.k_hafnian = 2 * std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(8.0 * std::sqrt(f))));
    s.clique = s.k_hafnian;
    s.k_density = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(80.0 * f)));
    return s;
}

inline const std::vector<std::string>& figure_names() {
    static const std::vector<std::string> names = {"fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b",
                                                   "fig4a", "fig4b", "fig4c", "fig4d", "fig5a", "fig5b",
                                                   "fig5c", "fig5d", "exit-time"};
    return names;
}

/// Experiments for a named figure. "fig3" expands to both panels. Fugacities of
/// the full-size protocol are used only at scale 256; smaller runs calibrate c.
inline std::vector<ExperimentSpec> figure_preset(const std::string& name, std::size_t scale) {
    if (name == "fig3") {
        auto a = figure_preset("fig3a", scale), b = figure_preset("fig3b", scale);
        a.insert(a.end(), b.begin(), b.end());
        return a;
    }
    ExperimentSpec e;
    e.name = name;
    if (name == "exit-time") {
        e.task = Task::exit_time;
        e.graph = GeneratorSpec::hard_instance(e.exit.squares);
        e.graph_seed = 0;
        return {e};
    }
    const ScaledSizes z = scaled_sizes(scale);
    const bool full = scale == 256;
    auto& s = e.solve;
    const char panel = name.size() == 5 ? name[4] : '?';
    const std::string fig = name.substr(0, 4);
    if ((fig != "fig2" && fig != "fig3" && fig != "fig4" && fig != "fig5") || panel < 'a' ||
        panel > (fig == "fig3" ? 'b' : 'd'))
        throw ConfigError("unknown experiment '" + name + "'");
    const bool hafnian_panel = panel == 'a' || panel == 'b';
    s.objective = hafnian_panel ? Objective::hafnian : Objective::density;
    s.k = hafnian_panel ? z.k_hafnian : z.k_density;
    s.annealing = panel == 'b' || panel == 'd';
    if (fig == "fig2") {
        e.graph = hafnian_panel ? GeneratorSpec::planted_clique(z.n, z.clique, 0.2) : GeneratorSpec::decreasing_degree(z.n);
        s.samplers = {SamplerKind::glauber, SamplerKind::jerrum};
        s.mixing = 10000;
        if (full) s.c = hafnian_panel ? 0.1 : 0.4;
    } else if (fig == "fig3") {
        e.task = Task::score_advantage;
        e.graph = GeneratorSpec::erdos_renyi(z.n, 0.4);
        s.objective = panel == 'a' ? Objective::hafnian : Objective::density;
        s.annealing = false;
        s.samplers = {SamplerKind::double_loop};
        s.iterations = 100;
        if (panel == 'a') {
            for (std::size_t k = 4; k <= z.k_hafnian + z.k_hafnian / 2; k += 2) s.k_values.push_back(k);
        } else {
            for (double f : {0.25, 0.5, 0.75, 1.0, 1.25})
                s.k_values.push_back(std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(f * z.k_density))));
        }
        if (full) s.c = 0.6;
    } else {
        const bool sparse = fig == "fig5";
        e.graph = sparse ? GeneratorSpec::sparse_bipartite(z.n / 2, 10 * z.n) : GeneratorSpec::random_bipartite(z.n / 2, 0.2);
        s.samplers = {SamplerKind::glauber, SamplerKind::double_loop, SamplerKind::jerrum};
        if (full) s.c = hafnian_panel ? (sparse ? 0.6 : 0.4) : 0.8;
    }
    e.validate();
    return {e};
}

// ---------------------------------------------------------------------------
// Running trials

/// Chain config for one sampler with the fugacity already resolved.
inline SolverConfig solver_config(const ExperimentSpec& e, SamplerKind sampler, std::size_t k, double c) {
    SolverConfig cfg;
    cfg.objective = e.solve.objective;
    cfg.k = k;
    cfg.iterations = e.solve.iterations;
    cfg.sampler = sampler;
    cfg.chain.chain.lambda = c * c;
    cfg.chain.chain.c = c;
    cfg.chain.chain.steps = e.solve.mixing;
    cfg.chain.inner = e.solve.inner;
    cfg.warm_chain = e.solve.warm;
    cfg.max_retries = e.solve.max_retries;
    if (e.solve.annealing) cfg.sa = AnnealingConfig{e.solve.t0, e.solve.gamma};
    return cfg;
}

/// Fugacity for a sampler: the configured c, else a calibration that puts the
/// chain's mean matching size at the post-selection target ceil(k/2).
inline double resolve_c(const Graph& g, const ExperimentSpec& e, SamplerKind sampler, std::size_t k) {
    if (sampler == SamplerKind::uniform) return 0.0;
    if (e.solve.c) return *e.solve.c;
    const SolverConfig base = solver_config(e, sampler, k, 1.0);
    return calibrate_c(g, base, (k + 1) / 2, derive_seed(e.seed, 0xC0FFEE + k)).c;
}

/// Hash of everything that determines a trial except its seed.
inline std::string config_hash(const ExperimentSpec& e, const SolverConfig& cfg) {
    json j;
    j["graph"] = graph_to_json(e.graph, e.graph_seed);
    j["algorithm"] = cfg.sa ? "sa" : "rs";
    j["objective"] = to_string(cfg.objective);
    j["k"] = cfg.k;
    j["iterations"] = cfg.iterations;
    j["sampler"] = sampler_name(cfg.sampler);
    if (cfg.sampler != SamplerKind::uniform) {
        j["lambda"] = fmt(cfg.chain.chain.lambda);
        j["mixing"] = cfg.chain.chain.steps;
        j["inner"] = inner_name(cfg.chain.inner);
        j["warm"] = cfg.warm_chain;
        j["max_retries"] = cfg.max_retries;
    }
    if (cfg.sa) j["sa"] = {fmt(cfg.sa->t0), fmt(cfg.sa->gamma)};
    return hex64(fnv1a64(j.dump()));
}

struct TrialOutcome {
    std::string hash;
    std::uint64_t seed = 0;
    SamplerKind sampler = SamplerKind::uniform;
    std::size_t k = 0;
    double c = 0.0;
    std::optional<TrialRecord> record;
    int error = exit_ok;
    std::string message;
};

/// Runs cfgs[i] with seed derive_seed(master, i % seeds) for every config, in
/// parallel; failures are captured per trial.
inline std::vector<TrialOutcome> run_trials(const Graph& g, const ExperimentSpec& e,
                                            const std::vector<std::pair<SolverConfig, double>>& cfgs) {
    std::vector<TrialOutcome> out(cfgs.size() * e.seeds);
    parallel_for(out.size(), e.threads, [&](std::size_t i) {
        const auto& [base, c] = cfgs[i / e.seeds];
        TrialOutcome& t = out[i];
        SolverConfig cfg = base;
        cfg.seed = derive_seed(e.seed, i % e.seeds);
        t.hash = config_hash(e, cfg);
        t.seed = cfg.seed;
        t.sampler = cfg.sampler;
        t.k = cfg.k;
        t.c = c;
        try {
            t.record = run_solver(g, cfg);
        } catch (const std::exception& ex) {
            t.error = exit_status(ex);
            t.message = ex.what();
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Plots as pure functions of the persisted tables

inline std::string plot_curves(const CsvTable& summary, const std::string& title) {
    const auto cs = summary.column("sampler"), ci = summary.column("iteration"), cm = summary.column("mean"),
               lo = summary.column("pct_low"), hi = summary.column("pct_high");
    PlotSpec p;
    p.title = title;
    p.x_label = "iteration";
    p.y_label = "best score (mean, 2.5-97.5% band)";
    std::map<std::string, std::size_t> index;
    for (const auto& r : summary.rows) {
        auto [it, fresh] = index.try_emplace(r[cs], p.series.size());
        if (fresh) p.series.push_back({r[cs], {}, {}, {}, {}});
        auto& s = p.series[it->second];
        s.x.push_back(to_double(r[ci]));
        s.y.push_back(to_double(r[cm]));
        s.lo.push_back(to_double(r[lo]));
        s.hi.push_back(to_double(r[hi]));
    }
    return render_svg(p);
}

inline std::string plot_advantage(const CsvTable& summary, const std::string& title) {
    const auto cs = summary.column("sampler"), ck = summary.column("k"), cr = summary.column("ratio");
    PlotSpec p;
    p.title = title;
    p.x_label = "k";
    p.y_label = "score advantage (enhanced / plain)";
    p.reference_y = 1.0;
    std::map<std::string, std::size_t> index;
    for (const auto& r : summary.rows) {
        auto [it, fresh] = index.try_emplace(r[cs], p.series.size());
        if (fresh) p.series.push_back({r[cs], {}, {}, {}, {}});
        p.series[it->second].x.push_back(to_double(r[ck]));
        p.series[it->second].y.push_back(to_double(r[cr]));
    }
    return render_svg(p);
}

/// Empirical survival P(T > t) of the exit times against the geometric law.
inline std::string plot_exit_times(const CsvTable& times, double exit_probability, const std::string& title) {
    const auto ct = times.column("exit_step");
    std::vector<double> steps;
    for (const auto& r : times.rows) steps.push_back(to_double(r[ct]));
    std::sort(steps.begin(), steps.end());
    PlotSpec p;
    p.title = title;
    p.x_label = "step";
    p.y_label = "P(exit time > step)";
    PlotSeries emp{"empirical", {}, {}, {}, {}}, geo{"geometric", {}, {}, {}, {}};
    const double tmax = steps.empty() ? 1.0 : steps.back();
    for (int i = 0; i <= 40; ++i) {
        const double t = std::floor(tmax * i / 40.0);
        const auto above = static_cast<double>(steps.end() - std::upper_bound(steps.begin(), steps.end(), t));
        emp.x.push_back(t);
        emp.y.push_back(steps.empty() ? 0.0 : above / static_cast<double>(steps.size()));
        geo.x.push_back(t);
        geo.y.push_back(std::pow(1.0 - exit_probability, t));
    }
    p.series = {emp, geo};
    return render_svg(p);
}

// ---------------------------------------------------------------------------
// Writing a results directory

struct RunReport {
    std::size_t trials = 0;
    std::size_t failures = 0;
    int status = exit_ok; // first failure's exit status
    std::vector<std::string> files;
};

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& text, RunReport& rep) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    f << text;
    rep.files.push_back(p.filename().string());
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw Error("cannot read " + p.string());
    return std::string(std::istreambuf_iterator<char>(f), {});
}

inline std::string set_field(const std::optional<VertexSet>& s) { return s ? s->to_hex() : "-"; }

inline json trial_status(const TrialOutcome& t) {
    json j = {{"config_hash", t.hash}, {"seed", t.seed}, {"sampler", sampler_name(t.sampler)}, {"k", t.k}};
    if (t.error != exit_ok) {
        j["status"] = "failed";
        j["exit_status"] = t.error;
        j["message"] = t.message;
    } else {
        j["status"] = "ok";
    }
    return j;
}

inline void note_failures(const std::vector<TrialOutcome>& ts, RunReport& rep) {
    for (const auto& t : ts) {
        ++rep.trials;
        if (t.error == exit_ok) continue;
        ++rep.failures;
        if (rep.status == exit_ok) rep.status = t.error;
    }
}

inline void run_solve(const Graph& g, const ExperimentSpec& e, const std::filesystem::path& dir, json& manifest,
                      RunReport& rep) {
    std::vector<std::pair<SolverConfig, double>> cfgs;
    cfgs.emplace_back(solver_config(e, SamplerKind::uniform, e.solve.k, 0.0), 0.0);
    json cs = json::object();
    for (auto s : e.solve.samplers) {
        const double c = resolve_c(g, e, s, e.solve.k);
        cs[sampler_name(s)] = fmt(c);
        cfgs.emplace_back(solver_config(e, s, e.solve.k, c), c);
    }
    manifest["fugacity_c"] = cs;
    const auto trials = run_trials(g, e, cfgs);
    note_failures(trials, rep);

    CsvTable curves{{"config_hash", "seed", "sampler", "iteration", "best"}, {}};
    CsvTable final_t{{"config_hash", "seed", "sampler", "algorithm", "objective", "k", "c", "mixing", "iterations",
                      "best_score", "best_set", "evaluations", "chain_draws", "starvations", "fallbacks",
                      "inner_failures", "status"},
                     {}};
    CsvTable summary{{"config_hash", "sampler", "iteration", "n_seeds", "mean", "std_error", "se_low", "se_high",
                      "pct_low", "pct_high"},
                     {}};
    json statuses = json::array();
    for (std::size_t ci = 0; ci < cfgs.size(); ++ci) {
        std::vector<const TrialRecord*> ok;
        std::string hash;
        for (std::size_t si = 0; si < e.seeds; ++si) {
            const auto& t = trials[ci * e.seeds + si];
            hash = t.hash;
            statuses.push_back(trial_status(t));
            const std::string name = sampler_name(t.sampler);
            if (!t.record) {
                final_t.rows.push_back({t.hash, fmt(t.seed), name, e.solve.annealing ? "sa" : "rs",
                                        to_string(e.solve.objective), fmt(std::uint64_t{t.k}), fmt(t.c),
                                        fmt(e.solve.mixing), fmt(e.solve.iterations), "-", "-", "0", "0", "0", "0", "0",
                                        "failed"});
                continue;
            }
            const auto& r = *t.record;
            ok.push_back(&r);
            for (std::size_t it = 0; it < r.score_trajectory.size(); ++it)
                curves.rows.push_back({t.hash, fmt(t.seed), name, fmt(std::uint64_t{it + 1}), fmt(r.score_trajectory[it])});
            final_t.rows.push_back({t.hash, fmt(t.seed), name, e.solve.annealing ? "sa" : "rs",
                                    to_string(e.solve.objective), fmt(std::uint64_t{t.k}), fmt(t.c),
                                    fmt(e.solve.mixing), fmt(e.solve.iterations), fmt(r.best_score),
                                    set_field(r.best_set), fmt(r.evaluations), fmt(r.chain_draws), fmt(r.starvations),
                                    fmt(r.fallbacks), fmt(r.inner_failure_count), "ok"});
        }
        if (ok.empty()) continue;
        for (std::size_t it = 0; it < e.solve.iterations; ++it) {
            std::vector<double> xs;
            for (const auto* r : ok) xs.push_back(r->score_trajectory[it]);
            const Band b = summarize(xs);
            summary.rows.push_back({hash, sampler_name(cfgs[ci].first.sampler), fmt(std::uint64_t{it + 1}),
                                    fmt(std::uint64_t{b.count}), fmt(b.mean), fmt(b.std_error), fmt(b.se_low),
                                    fmt(b.se_high), fmt(b.pct_low), fmt(b.pct_high)});
        }
    }
    manifest["trials"] = statuses;
    write_file(dir / "curves.csv", curves.str(), rep);
    write_file(dir / "trials.csv", final_t.str(), rep);
    write_file(dir / "summary.csv", summary.str(), rep);
}

inline void run_advantage(const Graph& g, const ExperimentSpec& e, const std::filesystem::path& dir, json& manifest,
                          RunReport& rep) {
    CsvTable per_seed{{"config_hash", "plain_hash", "seed", "k", "sampler", "c", "plain_best", "enhanced_best"}, {}};
    CsvTable summary{{"config_hash", "k", "sampler", "c", "n_seeds", "plain_mean", "enhanced_mean", "ratio"}, {}};
    json statuses = json::array(), cs = json::object();
    for (auto k : e.solve.k_values) {
        std::vector<std::pair<SolverConfig, double>> cfgs;
        cfgs.emplace_back(solver_config(e, SamplerKind::uniform, k, 0.0), 0.0);
        for (auto s : e.solve.samplers) {
            const double c = resolve_c(g, e, s, k);
            cs[sampler_name(s) + "@k=" + std::to_string(k)] = fmt(c);
            cfgs.emplace_back(solver_config(e, s, k, c), c);
        }
        const auto trials = run_trials(g, e, cfgs);
        note_failures(trials, rep);
        for (const auto& t : trials) statuses.push_back(trial_status(t));
        for (std::size_t ci = 1; ci < cfgs.size(); ++ci) {
            double plain = 0.0, enhanced = 0.0;
            std::size_t n = 0;
            std::string hash;
            for (std::size_t si = 0; si < e.seeds; ++si) {
                const auto& p = trials[si];
                const auto& q = trials[ci * e.seeds + si];
                hash = q.hash;
                if (!p.record || !q.record) continue;
                per_seed.rows.push_back({q.hash, p.hash, fmt(q.seed), fmt(std::uint64_t{k}), sampler_name(q.sampler),
                                         fmt(q.c), fmt(p.record->best_score), fmt(q.record->best_score)});
                plain += p.record->best_score;
                enhanced += q.record->best_score;
                ++n;
            }
            if (n == 0) continue;
            plain /= static_cast<double>(n);
            enhanced /= static_cast<double>(n);
            summary.rows.push_back({hash, fmt(std::uint64_t{k}), sampler_name(cfgs[ci].first.sampler),
                                    fmt(cfgs[ci].second), fmt(std::uint64_t{n}), fmt(plain), fmt(enhanced),
                                    fmt(score_ratio(enhanced, plain))});
        }
    }
    manifest["fugacity_c"] = cs;
    manifest["trials"] = statuses;
    write_file(dir / "advantage.csv", per_seed.str(), rep);
    write_file(dir / "advantage_summary.csv", summary.str(), rep);
}

inline void run_exit_time(const ExperimentSpec& e, const std::filesystem::path& dir, json& manifest, RunReport& rep) {
    const auto& x = e.exit;
    const auto res = exit_time_experiment(x.squares, x.lambda, x.trials, e.seed, InnerSampler::exact, x.max_steps,
                                          e.threads);
    const std::string hash =
        hex64(fnv1a64(json{{"squares", x.squares}, {"lambda", fmt(x.lambda)}, {"max_steps", x.max_steps}}.dump()));
    CsvTable times{{"config_hash", "seed", "trial", "exit_step"}, {}};
    for (std::size_t i = 0; i < res.exit_steps.size(); ++i)
        times.rows.push_back({hash, fmt(derive_seed(e.seed, i)), fmt(std::uint64_t{i}), fmt(res.exit_steps[i])});
    const auto fit = geometric_goodness_of_fit(res.exit_steps, res.exit_probability);
    CsvTable summary{{"config_hash", "seed", "squares", "lambda", "trials", "censored", "mean", "std_error", "ci_low",
                      "ci_high", "expected_mean", "chi_square", "dof", "p_value"},
                     {}};
    summary.rows.push_back({hash, fmt(e.seed), fmt(std::uint64_t{x.squares}), fmt(x.lambda),
                            fmt(std::uint64_t{x.trials}), fmt(res.censored), fmt(res.mean), fmt(res.std_error),
                            fmt(res.ci_low), fmt(res.ci_high), fmt(res.expected_mean), fmt(fit.chi_square),
                            fmt(std::uint64_t{fit.dof}), fmt(fit.p_value)});
    rep.trials = x.trials;
    manifest["result"] = {{"mean", fmt(res.mean)}, {"expected_mean", fmt(res.expected_mean)},
                          {"censored", res.censored}, {"p_value", fmt(fit.p_value)}};
    write_file(dir / "exit_times.csv", times.str(), rep);
    write_file(dir / "exit_summary.csv", summary.str(), rep);
}

} // namespace detail

/// Rewrites the SVG plot of a results directory from its CSV tables alone.
/// Returns the plot file name.
inline std::string replot(const ExperimentSpec& e, const std::filesystem::path& dir) {
    RunReport rep;
    if (e.task == Task::exit_time) {
        const std::string title = e.name + ": exit from M0, " + std::to_string(e.exit.squares) + " squares";
        const double p = hard_instance_exit_probability(e.exit.squares, e.exit.lambda);
        detail::write_file(dir / "exit_times.svg",
                           plot_exit_times(parse_csv(detail::read_file(dir / "exit_times.csv")), p, title), rep);
    } else if (e.task == Task::score_advantage) {
        const std::string title = e.name + ": score advantage, " + to_string(e.solve.objective);
        detail::write_file(dir / "advantage.svg",
                           plot_advantage(parse_csv(detail::read_file(dir / "advantage_summary.csv")), title), rep);
    } else {
        const std::string title = e.name + ": " + (e.solve.annealing ? "simulated annealing, " : "random search, ") +
                                  to_string(e.solve.objective) + ", k=" + std::to_string(e.solve.k);
        detail::write_file(dir / "summary.svg", plot_curves(parse_csv(detail::read_file(dir / "summary.csv")), title),
                           rep);
    }
    return rep.files.front();
}

/// replot for a directory written by run_experiment, reading its manifest.
inline std::string replot(const std::filesystem::path& dir) {
    const json m = json::parse(detail::read_file(dir / "manifest.json"));
    return replot(ExperimentSpec::from_json(m.at("experiment")), dir);
}

/// Runs an experiment into `dir` (created if needed): CSV tables, an SVG plot
/// regenerated from the written CSV, and manifest.json. Trial failures are
/// recorded rather than thrown, so completed trials always persist.
inline RunReport run_experiment(const ExperimentSpec& e, const std::filesystem::path& dir) {
    e.validate();
    std::filesystem::create_directories(dir);
    RunReport rep;
    json manifest;
    manifest["experiment"] = e.to_json();
    if (e.task == Task::exit_time) {
        detail::run_exit_time(e, dir, manifest, rep);
    } else {
        const Graph g = gen_graph(e.graph, e.graph_seed);
        manifest["graph_summary"] = {{"n", g.n_vertices()}, {"m", g.n_edges()}};
        if (e.task == Task::solve)
            detail::run_solve(g, e, dir, manifest, rep);
        else
            detail::run_advantage(g, e, dir, manifest, rep);
    }
    rep.files.push_back(replot(e, dir));
    manifest["trial_count"] = rep.trials;
    manifest["failures"] = rep.failures;
    manifest["files"] = rep.files;
    detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n", rep);
    return rep;
}

} // namespace gbs::bench
