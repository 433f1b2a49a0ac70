// gbs: command-line front end for graph generation, sampling, solving,
// verification and experiment reproduction.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "gbs/bench/experiment.hpp"
#include "gbs/diagnostics.hpp"
#include "gbs/double_loop.hpp"
#include "gbs/generators.hpp"
#include "gbs/matching_chain.hpp"
#include "gbs/solvers.hpp"

namespace fs = std::filesystem;
using namespace gbs;
using namespace gbs::bench;

namespace {

fs::path output_root() {
    const char* env = std::getenv("GBS_OUTPUT_ROOT");
    return env && *env ? fs::path(env) : fs::path("gbs-results");
}

// Graph source shared by the subcommands: an edge-list file or a generator.
struct GraphArgs {
    std::string file;
    std::string family;
    std::size_t n = 0, m = 0, clique = 0, side = 0, edges = 0, squares = 0;
    double p = 0.0;
    std::uint64_t seed = 1;

    void add_generator_flags(CLI::App* app) {
        app->add_option("--n", n, "vertices (or first side for complete-bipartite)");
        app->add_option("--m", m, "second side for complete-bipartite");
        app->add_option("--p", p, "edge probability");
        app->add_option("--clique", clique, "planted clique size");
        app->add_option("--side", side, "vertices per side for bipartite families");
        app->add_option("--edges", edges, "edge count for sparse-bipartite");
        app->add_option("--squares", squares, "squares in the hard instance");
    }

    void add(CLI::App* app) {
        app->add_option("--graph", file, "edge-list file");
        app->add_option("--family", family,
                        "generator: planted-clique, decreasing-degree, er, bipartite, sparse-bipartite, complete, "
                        "complete-bipartite, hard-instance");
        app->add_option("--graph-seed", seed, "generator seed");
        add_generator_flags(app);
    }

    GeneratorSpec spec() const {
        json j = {{"family", family}, {"seed", seed}};
        if (n) j["n"] = n;
        if (m) j["m"] = m;
        if (clique) j["clique"] = clique;
        if (side) j["side"] = side;
        if (edges) j["edges"] = edges;
        if (squares) j["squares"] = squares;
        if (family == "planted-clique" || family == "er" || family == "bipartite") j["p"] = p;
        std::uint64_t ignored = 0;
        return graph_from_json(j, ignored);
    }

    Graph load() const {
        if (!file.empty() && !family.empty()) throw ConfigError("give either --graph or --family, not both");
        if (!file.empty()) {
            std::ifstream in(file);
            if (!in) throw ConfigError("cannot open graph file " + file);
            return read_edge_list(in);
        }
        if (family.empty()) throw ConfigError("a graph is required: --graph FILE or --family NAME");
        return gen_graph(spec(), seed);
    }
};

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    return f;
}

double edge_density(const Graph& g) {
    const double n = static_cast<double>(g.n_vertices());
    return n < 2 ? 0.0 : 2.0 * static_cast<double>(g.n_edges()) / (n * (n - 1.0));
}

// ---------------------------------------------------------------------------

struct GenArgs {
    std::string family;
    GraphArgs graph;
    std::string out;
};

int cmd_gen_graph(const GenArgs& a) {
    GraphArgs ga = a.graph;
    ga.family = a.family;
    const Graph g = ga.load();
    if (!a.out.empty()) {
        auto f = open_out(a.out);
        write_edge_list(f, g);
    }
    std::cout << g.n_vertices() << ' ' << g.n_edges() << ' ' << fmt(edge_density(g)) << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------------------

struct SampleArgs {
    GraphArgs graph;
    std::string chain = "glauber";
    std::optional<double> c, lambda;
    std::uint64_t steps = 0, samples = 1000, seed = 0;
    std::size_t post_select_k = 0;
    std::string inner = "adaptive";
    std::string out;
};

double resolve_lambda(const std::optional<double>& c, const std::optional<double>& lambda) {
    if (c && lambda) throw ConfigError("give either --c or --lambda, not both");
    if (c) return *c * *c;
    return lambda.value_or(1.0);
}

int cmd_sample(const SampleArgs& a) {
    const Graph g = a.graph.load();
    const double lambda = resolve_lambda(a.c, a.lambda);
    if (!(lambda > 0.0)) throw ConfigError("fugacity must be positive");
    if (a.samples == 0) throw ConfigError("--samples must be positive");
    const std::uint64_t steps = a.steps ? a.steps : 100 * a.samples;
    if (a.post_select_k && (a.post_select_k & 1)) throw ConfigError("--post-select-k must be even");
    std::ostringstream buf;
    std::ostream* sink = &std::cout;
    std::ofstream file;
    if (!a.out.empty()) {
        file = open_out(a.out);
        sink = &file;
    }
    Rng rng(a.seed);

    if (a.chain == "rejection") {
        // each line is one accepted round; `step` counts single-loop rounds so far
        ChainConfig cfg;
        cfg.lambda = lambda;
        cfg.steps = a.steps ? a.steps : 1000;
        std::uint64_t rounds = 0;
        for (std::uint64_t i = 0; i < a.samples; ++i) {
            const auto r = rejection_sample(g, cfg, 1'000'000, rng);
            rounds += r.rounds;
            *sink << rounds << ',' << r.set.to_hex() << '\n';
        }
        return exit_ok;
    }

    std::optional<DoubleLoopStepper> dl;
    DoubleLoopConfig dcfg;
    dcfg.chain.lambda = lambda;
    dcfg.inner = parse_inner(a.inner);
    if (a.chain == "double-loop")
        dl.emplace(g, dcfg);
    else if (a.chain != "glauber" && a.chain != "jerrum")
        throw ConfigError("unknown chain '" + a.chain + "'");

    Matching x(g.n_vertices());
    std::optional<Matching> hit;
    std::uint64_t t = 0;
    for (std::uint64_t i = 0; i < a.samples; ++i) {
        // sample i is read at step ceil((i+1) * steps / samples)
        const std::uint64_t until = ((i + 1) * steps + a.samples - 1) / a.samples;
        hit.reset();
        for (; t < until; ++t) {
            if (dl)
                (*dl)(x, rng);
            else if (a.chain == "glauber")
                glauber_step_inplace(g, x, lambda, false, rng);
            else
                jerrum_step_inplace(g, x, lambda, false, rng);
            if (a.post_select_k && 2 * x.size() == a.post_select_k) hit = x;
        }
        const Matching& shown = a.post_select_k ? (hit ? *hit : x) : x;
        if (a.post_select_k && !hit) {
            sink->flush();
            std::cerr << "error: post-selection starved in window " << i << " (no state with "
                      << a.post_select_k / 2 << " edges)\n";
            return exit_starvation;
        }
        *sink << t << ',' << shown.vertex_set().to_hex() << '\n';
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------

struct SolveArgs {
    GraphArgs graph;
    std::string alg = "rs", sampler = "uniform", objective = "hafnian", inner = "adaptive";
    std::size_t k = 2;
    std::uint64_t iters = 1000, mixing = 1000, seed = 0, max_retries = 8;
    std::size_t seeds = 1;
    std::optional<double> c;
    double t0 = 1.0, gamma = 0.95;
    bool cold = false;
    std::string out_dir;
};

int cmd_solve(const SolveArgs& a) {
    if (!a.graph.file.empty()) throw ConfigError("solve takes a generator (--family), so records can be re-run");
    ExperimentSpec e;
    e.name = "solve";
    e.graph = a.graph.spec();
    e.graph_seed = a.graph.seed;
    e.seed = a.seed;
    e.seeds = a.seeds;
    if (a.alg != "rs" && a.alg != "sa") throw ConfigError("--alg must be rs or sa");
    e.solve.annealing = a.alg == "sa";
    e.solve.objective = parse_objective(a.objective);
    e.solve.k = a.k;
    e.solve.iterations = a.iters;
    e.solve.c = a.c;
    e.solve.mixing = a.mixing;
    e.solve.t0 = a.t0;
    e.solve.gamma = a.gamma;
    e.solve.inner = parse_inner(a.inner);
    e.solve.warm = !a.cold;
    e.solve.max_retries = a.max_retries;
    const SamplerKind kind = parse_sampler(a.sampler);
    if (kind != SamplerKind::uniform) e.solve.samplers = {kind};
    e.validate();

    const Graph g = gen_graph(e.graph, e.graph_seed);
    const double c = resolve_c(g, e, kind, e.solve.k);
    const SolverConfig cfg = solver_config(e, kind, e.solve.k, c);
    const auto trials = run_trials(g, e, {{cfg, c}});

    json rec;
    rec["graph"] = graph_to_json(e.graph, e.graph_seed);
    rec["algorithm"] = a.alg;
    rec["objective"] = a.objective;
    rec["sampler"] = sampler_name(kind);
    rec["k"] = e.solve.k;
    rec["iterations"] = e.solve.iterations;
    if (kind != SamplerKind::uniform) {
        rec["c"] = fmt(c);
        rec["lambda"] = fmt(c * c);
        rec["mixing"] = e.solve.mixing;
        rec["inner"] = a.inner;
        rec["warm_chain"] = e.solve.warm;
    }
    if (cfg.sa) rec["annealing"] = {{"t0", cfg.sa->t0}, {"gamma", cfg.sa->gamma}};
    CsvTable traj{{"config_hash", "seed", "iteration", "best"}, {}};
    json runs = json::array();
    int status = exit_ok;
    double sum = 0.0;
    std::size_t ok = 0;
    for (const auto& t : trials) {
        rec["config_hash"] = t.hash;
        json r = {{"seed", t.seed}};
        if (!t.record) {
            r["status"] = "failed";
            r["message"] = t.message;
            if (status == exit_ok) status = t.error;
            runs.push_back(r);
            continue;
        }
        const auto& tr = *t.record;
        r["status"] = "ok";
        r["best_score"] = tr.best_score;
        r["best_set"] = tr.best_set ? tr.best_set->to_hex() : "";
        r["evaluations"] = tr.evaluations;
        r["chain_draws"] = tr.chain_draws;
        r["starvations"] = tr.starvations;
        r["fallbacks"] = tr.fallbacks;
        r["inner_failures"] = tr.inner_failure_count;
        runs.push_back(r);
        for (std::size_t i = 0; i < tr.score_trajectory.size(); ++i)
            traj.rows.push_back({t.hash, fmt(t.seed), fmt(std::uint64_t{i + 1}), fmt(tr.score_trajectory[i])});
        sum += tr.best_score;
        ++ok;
        std::cerr << "seed " << t.seed << ": best " << fmt(tr.best_score) << " in " << tr.wall_time << " s\n";
    }
    rec["runs"] = runs;
    if (ok) rec["mean_best_score"] = sum / static_cast<double>(ok);

    const fs::path dir = a.out_dir.empty() ? output_root() / "solve" : fs::path(a.out_dir);
    fs::create_directories(dir);
    open_out(dir / "record.json") << rec.dump(2) << '\n';
    open_out(dir / "trajectory.csv") << traj.str();
    std::cout << "mean_best=" << (ok ? fmt(sum / static_cast<double>(ok)) : "nan") << " seeds=" << ok
              << " out=" << dir.string() << '\n';
    return status;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
    GraphArgs graph;
    std::string samples;
    std::string law = "double";
    std::optional<double> c, lambda;
    std::optional<double> max_tv;
    std::string out;
};

int cmd_verify(const VerifyArgs& a) {
    const Graph g = a.graph.load();
    const double lambda = resolve_lambda(a.c, a.lambda);
    StationaryLaw law;
    if (a.law == "single")
        law = StationaryLaw::vertexset_single;
    else if (a.law == "double")
        law = StationaryLaw::vertexset_double;
    else
        throw ConfigError("--law must be single or double");
    std::ifstream in(a.samples);
    if (!in) throw ConfigError("cannot open samples file " + a.samples);
    std::map<std::string, std::uint64_t> counts;
    std::string line;
    std::uint64_t n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError("malformed sample line: " + line);
        ++counts[line.substr(comma + 1)];
        ++n;
    }
    if (n == 0) throw ConfigError("no samples in " + a.samples);
    const auto exact = exact_stationary(g, lambda, law);
    const auto emp = DistributionTable::from_counts(StateKind::vertex_set, counts);
    const double tv = tv_distance(emp, exact);
    if (!a.out.empty()) {
        CsvTable t{{"state_encoding", "empirical", "exact"}, {}};
        std::map<std::string, std::pair<double, double>> rows;
        for (std::size_t i = 0; i < emp.size(); ++i) rows[emp.support()[i]].first = emp.mass()[i];
        for (std::size_t i = 0; i < exact.size(); ++i) rows[exact.support()[i]].second = exact.mass()[i];
        for (const auto& [k, v] : rows) t.rows.push_back({k, fmt(v.first), fmt(v.second)});
        open_out(a.out) << t.str();
    }
    std::cout << "tv=" << fmt(tv) << " samples=" << n << " support=" << exact.size() << '\n';
    if (a.max_tv && tv > *a.max_tv) return exit_other;
    return exit_ok;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    std::string name, spec_file, out_dir;
    std::size_t scale = 64, threads = 1;
    std::optional<std::size_t> seeds, squares, trials;
    std::optional<std::uint64_t> iters, mixing, seed;
    std::optional<double> c, lambda;
    bool list = false;
};

void print_report(const ExperimentSpec& e, const fs::path& dir, const RunReport& rep) {
    std::cout << e.name << ": " << rep.trials << " trials, " << rep.failures << " failed, out=" << dir.string() << '\n';
    if (e.task == Task::exit_time) {
        std::ifstream f(dir / "exit_summary.csv");
        const auto t = read_csv(f);
        const auto& r = t.rows.at(0);
        std::cout << "  mean=" << r[t.column("mean")] << " expected=" << r[t.column("expected_mean")] << " ci=["
                  << r[t.column("ci_low")] << ", " << r[t.column("ci_high")] << "] gof_p=" << r[t.column("p_value")]
                  << '\n';
    } else if (e.task == Task::score_advantage) {
        std::ifstream f(dir / "advantage_summary.csv");
        const auto t = read_csv(f);
        for (const auto& r : t.rows)
            std::cout << "  k=" << r[t.column("k")] << " " << r[t.column("sampler")] << " ratio=" << r[t.column("ratio")]
                      << " (plain " << r[t.column("plain_mean")] << ", enhanced " << r[t.column("enhanced_mean")]
                      << ")\n";
    } else {
        std::ifstream f(dir / "summary.csv");
        const auto t = read_csv(f);
        const std::string last = std::to_string(e.solve.iterations);
        for (const auto& r : t.rows)
            if (r[t.column("iteration")] == last)
                std::cout << "  " << r[t.column("sampler")] << " final mean=" << r[t.column("mean")] << " band=["
                          << r[t.column("pct_low")] << ", " << r[t.column("pct_high")] << "]\n";
    }
}

int cmd_bench(const BenchArgs& a) {
    if (a.list) {
        for (const auto& n : figure_names()) std::cout << n << '\n';
        std::cout << "fig3\n";
        return exit_ok;
    }
    std::vector<ExperimentSpec> specs;
    if (!a.spec_file.empty()) {
        if (!a.name.empty()) throw ConfigError("give an experiment name or --spec, not both");
        std::ifstream in(a.spec_file);
        if (!in) throw ConfigError("cannot open spec file " + a.spec_file);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& ex) {
            throw ConfigError(std::string("spec file is not valid JSON: ") + ex.what());
        }
        specs.push_back(ExperimentSpec::from_json(j));
    } else {
        if (a.name.empty()) throw ConfigError("bench needs an experiment name (see --list) or --spec");
        specs = figure_preset(a.name, a.scale);
    }
    int status = exit_ok;
    for (auto& e : specs) {
        if (a.seeds) e.seeds = *a.seeds;
        if (a.iters) e.solve.iterations = *a.iters;
        if (a.mixing) e.solve.mixing = *a.mixing;
        if (a.seed) e.seed = *a.seed;
        if (a.c) e.solve.c = *a.c;
        if (e.task == Task::exit_time) {
            if (a.squares) e.exit.squares = *a.squares;
            if (a.lambda) e.exit.lambda = *a.lambda;
            if (a.trials) e.exit.trials = *a.trials;
            e.graph = GeneratorSpec::hard_instance(e.exit.squares);
        }
        e.threads = static_cast<unsigned>(a.threads);
        e.validate();
        const fs::path dir = a.out_dir.empty() ? output_root() / e.name
                             : specs.size() > 1   ? fs::path(a.out_dir) / e.name
                                                  : fs::path(a.out_dir);
        const RunReport rep = run_experiment(e, dir);
        print_report(e, dir, rep);
        if (status == exit_ok) status = rep.status;
    }
    return status;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Glauber-dynamics samplers for Gaussian boson sampling distributions"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen-graph", "generate a benchmark graph as an edge list");
    g->add_option("family", gen.family, "graph family")->required();
    g->add_option("--seed", gen.graph.seed, "generator seed");
    gen.graph.add_generator_flags(g);
    g->add_option("--out", gen.out, "edge-list output file");

    SampleArgs smp;
    auto* s = app.add_subcommand("sample", "run a chain and print 'step,vertex_set_hex' lines");
    smp.graph.add(s);
    s->add_option("--chain", smp.chain, "glauber, jerrum, double-loop or rejection");
    s->add_option("--c", smp.c, "rescaling parameter (lambda = c^2)");
    s->add_option("--lambda", smp.lambda, "fugacity");
    s->add_option("--steps", smp.steps, "chain length (per round for rejection)");
    s->add_option("--samples", smp.samples, "number of samples");
    s->add_option("--seed", smp.seed, "random seed");
    s->add_option("--post-select-k", smp.post_select_k, "report the latest state with k/2 edges");
    s->add_option("--inner", smp.inner, "double-loop inner sampler: chain, exact, counting, adaptive");
    s->add_option("--out", smp.out, "write samples to a file instead of stdout");

    SolveArgs sol;
    auto* v = app.add_subcommand("solve", "run random search or simulated annealing");
    sol.graph.add(v);
    v->add_option("--alg", sol.alg, "rs or sa");
    v->add_option("--sampler", sol.sampler, "uniform, glauber, jerrum or double-loop");
    v->add_option("--objective", sol.objective, "hafnian or density");
    v->add_option("--k", sol.k, "subgraph size");
    v->add_option("--iters", sol.iters, "iterations");
    v->add_option("--c", sol.c, "rescaling parameter; calibrated to the target size when absent");
    v->add_option("--mixing", sol.mixing, "chain steps per draw");
    v->add_option("--t0", sol.t0, "initial temperature");
    v->add_option("--gamma", sol.gamma, "annealing factor");
    v->add_option("--seed", sol.seed, "master seed");
    v->add_option("--seeds", sol.seeds, "number of derived seeds");
    v->add_option("--inner", sol.inner, "double-loop inner sampler");
    v->add_option("--max-retries", sol.max_retries, "extra chain draws after starvation");
    v->add_flag("--cold", sol.cold, "restart the chain from the empty matching for every draw");
    v->add_option("--out-dir", sol.out_dir, "output directory");

    VerifyArgs ver;
    auto* f = app.add_subcommand("verify", "total-variation distance of a samples file to the exact law");
    ver.graph.add(f);
    f->add_option("--samples", ver.samples, "file of 'step,vertex_set_hex' lines")->required();
    f->add_option("--law", ver.law, "single (c^|S| Haf) or double (c^2|S| Haf^2)");
    f->add_option("--c", ver.c, "rescaling parameter");
    f->add_option("--lambda", ver.lambda, "fugacity");
    f->add_option("--max-tv", ver.max_tv, "exit with status 1 above this distance");
    f->add_option("--out", ver.out, "write empirical and exact masses as CSV");

    BenchArgs ben;
    auto* b = app.add_subcommand("bench", "reproduce a named experiment or a JSON experiment spec");
    b->add_option("name", ben.name, "experiment name");
    b->add_option("--spec", ben.spec_file, "JSON experiment spec");
    b->add_option("--scale", ben.scale, "vertex count of the benchmark graphs (256 is full size)");
    b->add_option("--seeds", ben.seeds, "seeds per variant");
    b->add_option("--iters", ben.iters, "solver iterations");
    b->add_option("--mixing", ben.mixing, "chain steps per draw");
    b->add_option("--seed", ben.seed, "master seed");
    b->add_option("--c", ben.c, "fixed rescaling parameter for every sampler");
    b->add_option("--squares", ben.squares, "exit-time: squares in the hard instance");
    b->add_option("--lambda", ben.lambda, "exit-time: fugacity");
    b->add_option("--trials", ben.trials, "exit-time: trials");
    b->add_option("--threads", ben.threads, "worker threads");
    b->add_option("--out-dir", ben.out_dir, "results directory");
    b->add_flag("--list", ben.list, "list experiment names");

    std::string replot_dir;
    auto* r = app.add_subcommand("replot", "regenerate the plot of a results directory from its CSV files");
    r->add_option("dir", replot_dir, "results directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        if (*g) return cmd_gen_graph(gen);
        if (*s) return cmd_sample(smp);
        if (*v) return cmd_solve(sol);
        if (*f) return cmd_verify(ver);
        if (*b) return cmd_bench(ben);
        if (*r) {
            std::cout << replot(replot_dir) << '\n';
            return exit_ok;
        }
    } catch (const StarvationError& e) {
        std::cerr << "starvation: " << e.what() << '\n';
        return exit_starvation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_status(e);
    }
    return exit_other;
}
