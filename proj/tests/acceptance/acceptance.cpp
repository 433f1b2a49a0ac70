// Acceptance suite: one [PASS]/[FAIL] line per criterion, detail lines indented.
// Exit status is the number of failed criteria.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gbs/bench/experiment.hpp"
#include "gbs/diagnostics.hpp"
#include "gbs/double_loop.hpp"
#include "gbs/generators.hpp"
#include "gbs/hafnian.hpp"
#include "gbs/matching_chain.hpp"
#include "gbs/pm_sampler.hpp"
#include "gbs/solvers.hpp"

namespace fs = std::filesystem;
using namespace gbs;
using namespace gbs::bench;

namespace {

struct Outcome {
    bool pass = false;
    std::vector<std::string> details;

    void note(const std::string& s) { details.push_back(s); }
    void check(bool ok, const std::string& s) {
        note(std::string(ok ? "ok   " : "MISS ") + s);
        pass = pass && ok;
    }
};

std::string f6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

int failures = 0;

void criterion(int id, const std::string& title, double limit_s, const std::function<void(Outcome&)>& body) {
    Outcome o;
    o.pass = true;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.note(std::string("exception: ") + e.what());
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = dt < limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("[%s] %d. %s (%.1f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", id, title.c_str(), dt, limit_s,
                in_time ? "" : ", over time");
    for (const auto& d : o.details) std::printf("       %s\n", d.c_str());
    std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// Independent laws built from enumerated matchings

DistributionTable normalized(StateKind kind, std::map<std::string, double> w) {
    double z = 0.0;
    for (const auto& [k, v] : w) z += v;
    for (auto& [k, v] : w) v /= z;
    return DistributionTable::from_masses(kind, std::move(w));
}

// lambda^|X| over all matchings.
DistributionTable single_law(const Graph& g, double lambda) {
    std::map<std::string, double> w;
    for (const auto& x : enumerate_matchings(g)) w[x.key()] = std::pow(lambda, static_cast<double>(x.size()));
    return normalized(StateKind::matching, std::move(w));
}

// lambda^(2|X|) w(X) sum over perfect matchings M of G_V(X) of w(M).
DistributionTable double_law(const Graph& g, double lambda) {
    std::map<std::string, double> w;
    for (const auto& x : enumerate_matchings(g)) {
        const auto sub = induced_subgraph(g, x.vertex_set());
        double haf = 0.0;
        for (const auto& m : enumerate_perfect_matchings(sub.graph)) haf += matching_weight(sub.graph, m);
        w[x.key()] = std::pow(lambda, 2.0 * static_cast<double>(x.size())) * haf * matching_weight(g, x);
    }
    return normalized(StateKind::matching, std::move(w));
}

// c^(2|S|) Haf(S)^2 over even vertex subsets, Haf by perfect-matching enumeration.
DistributionTable vertex_double_law(const Graph& g, double c) {
    std::map<std::string, double> w;
    const std::size_t n = g.n_vertices();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        VertexSet s(n);
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1U) s.members.set(i);
        if (s.size() & 1) continue;
        const double haf =
            static_cast<double>(enumerate_perfect_matchings(induced_subgraph(g, s).graph).size());
        if (haf > 0) w[s.to_hex()] = std::pow(c, 2.0 * static_cast<double>(s.size())) * haf * haf;
    }
    return normalized(StateKind::vertex_set, std::move(w));
}

// Uniform over perfect and near-perfect matchings, or proportional to w(M).
DistributionTable pm_law(const Graph& g) {
    std::map<std::string, double> w;
    const std::size_t half = g.n_vertices() / 2;
    for (const auto& m : enumerate_matchings(g))
        if (m.size() + 1 >= half) w[m.key()] = matching_weight(g, m);
    return normalized(StateKind::matching, std::move(w));
}

// K6 minus one edge: the dense 6-vertex graph of criteria 3 and 5.
Graph dense6() {
    std::vector<Edge> e;
    for (Vertex i = 0; i < 6; ++i)
        for (Vertex j = i + 1; j < 6; ++j)
            if (!(i == 0 && j == 1)) e.emplace_back(i, j);
    return Graph(6, std::move(e));
}

std::uint64_t double_factorial(std::uint64_t n) {
    std::uint64_t r = 1;
    for (; n > 1; n -= 2) r *= n;
    return r;
}

// ---------------------------------------------------------------------------
// CLI helpers for criterion 9

int run_cli(const std::string& args) {
    const std::string cmd = std::string(GBS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// Every regular file under a, compared byte for byte with its twin under b.
bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
    files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) return false;
        ++files;
    }
    return files > 0;
}

// ---------------------------------------------------------------------------
// Solver comparisons for criteria 7 and 8

struct VariantResult {
    SamplerKind sampler;
    double c = 0.0;
    std::vector<double> best; // per seed
    double mean() const {
        double s = 0.0;
        for (double b : best) s += b;
        return best.empty() ? 0.0 : s / static_cast<double>(best.size());
    }
};

// Plain solver first, then every configured sampler, all over e.seeds seeds.
std::vector<VariantResult> compare(const ExperimentSpec& e) {
    const Graph g = gen_graph(e.graph, e.graph_seed);
    std::vector<std::pair<SolverConfig, double>> cfgs;
    cfgs.emplace_back(solver_config(e, SamplerKind::uniform, e.solve.k, 0.0), 0.0);
    for (auto s : e.solve.samplers) {
        const double c = resolve_c(g, e, s, e.solve.k);
        cfgs.emplace_back(solver_config(e, s, e.solve.k, c), c);
    }
    const auto trials = run_trials(g, e, cfgs);
    std::vector<VariantResult> out;
    for (std::size_t ci = 0; ci < cfgs.size(); ++ci) {
        VariantResult v{cfgs[ci].first.sampler, cfgs[ci].second, {}};
        for (std::size_t s = 0; s < e.seeds; ++s) {
            const auto& t = trials[ci * e.seeds + s];
            if (!t.record) throw Error("trial failed: " + t.message);
            v.best.push_back(t.record->best_score);
        }
        out.push_back(std::move(v));
    }
    return out;
}

ExperimentSpec preset(const std::string& name) { return figure_preset(name, 64).at(0); }

} // namespace

int main() {
    std::printf("acceptance suite\n");

    criterion(1, "hafnian closed forms", 5, [](Outcome& o) {
        bool ok = true;
        for (std::size_t n = 1; n <= 6; ++n) {
            const auto h = hafnian(gen_graph(GeneratorSpec::complete(2 * n), 0));
            ok = ok && h.count == BigInt(double_factorial(2 * n - 1));
        }
        o.check(ok, "Haf(K_2n) = (2n-1)!! for n = 1..6");
        ok = true;
        std::uint64_t fact = 1;
        for (std::size_t n = 1; n <= 6; ++n) {
            fact *= n;
            ok = ok && hafnian(gen_graph(GeneratorSpec::complete_bipartite(n, n), 0)).count == BigInt(fact);
        }
        o.check(ok, "Haf(K_n,n) = n! for n = 1..6");
        ok = true;
        for (std::size_t n = 2; n <= 8; ++n)
            ok = ok && hafnian(gen_graph(GeneratorSpec::hard_instance(n), 0)).count == BigInt((1ull << n) + 1);
        o.check(ok, "Haf(hard_instance(n)) = 1 + 2^n for n = 2..8");
    });

    criterion(2, "detailed balance certificates", 60, [](Outcome& o) {
        std::vector<std::pair<std::string, Graph>> suite;
        suite.emplace_back("K4", gen_graph(GeneratorSpec::complete(4), 0));
        suite.emplace_back("K6", gen_graph(GeneratorSpec::complete(6), 0));
        suite.emplace_back("K33", gen_graph(GeneratorSpec::complete_bipartite(3, 3), 0));
        suite.emplace_back("path6", path_graph(6));
        suite.emplace_back("cycle6", cycle_graph(6));
        suite.emplace_back("G(8,0.6)", gen_graph(GeneratorSpec::erdos_renyi(8, 0.6), 1));
        suite.emplace_back("weighted C4", Graph(4, cycle_graph(4).edges(), std::vector<double>{1.0, 2.0, 1.5, 3.0}));
        suite.emplace_back("hard2", gen_graph(GeneratorSpec::hard_instance(2), 0));

        std::map<std::string, double> worst;
        for (const auto& [name, g] : suite) {
            const auto states = enumerate_matchings(g);
            for (double lambda : {0.5, 1.0, 2.0}) {
                ChainConfig cc;
                cc.lambda = lambda;
                const auto s_law = single_law(g, lambda);
                worst["single-loop"] = std::max(worst["single-loop"], check_detailed_balance(
                    states, [&](const Matching& x) { return glauber_kernel(g, x, cc); }, s_law));
                worst["jerrum"] = std::max(worst["jerrum"], check_detailed_balance(
                    states, [&](const Matching& x) { return jerrum_kernel(g, x, cc); }, s_law));
                DoubleLoopConfig dc;
                dc.chain.lambda = lambda;
                dc.inner = InnerSampler::exact;
                const std::string key = g.weighted() ? "weighted double-loop" : "double-loop (exact inner)";
                worst[key] = std::max(worst[key], check_detailed_balance(
                    states, [&](const Matching& x) { return double_loop_kernel_exact(g, x, dc); },
                    double_law(g, lambda)));
            }
            if (g.n_vertices() % 2 == 0 && !enumerate_perfect_matchings(g).empty()) {
                const auto pm_states = pm_state_space(g);
                const std::string key = g.weighted() ? "weighted PM chain" : "PM chain";
                const double v = g.weighted()
                    ? check_detailed_balance(pm_states, [&](const Matching& m) { return weighted_pm_kernel(g, m); }, pm_law(g))
                    : check_detailed_balance(pm_states, [&](const Matching& m) { return pm_kernel(g, m); }, pm_law(g));
                worst[key] = std::max(worst[key], v);
            }
        }
        for (const auto& [chain, v] : worst) o.check(v < 1e-12, chain + ": max violation " + f6(v));
    });

    criterion(3, "stationary-law convergence", 600, [](Outcome& o) {
        {
            const Graph g = gen_graph(GeneratorSpec::complete(6), 0);
            Rng rng(11);
            Matching x(6);
            const std::size_t thin = 10;
            for (int t = 0; t < 10000; ++t) glauber_step_inplace(g, x, 1.0, false, rng);
            std::map<std::string, std::uint64_t> counts;
            for (int i = 0; i < 1000000; ++i) {
                for (std::size_t t = 0; t < thin; ++t) glauber_step_inplace(g, x, 1.0, false, rng);
                ++counts[x.key()];
            }
            const double tv = tv_distance(DistributionTable::from_counts(StateKind::matching, counts), single_law(g, 1.0));
            o.check(tv <= 0.01, "single-loop on K6, lambda = 1, 1e6 samples (every " + std::to_string(thin) +
                                    " steps): TV " + f6(tv));
        }
        {
            const Graph g = dense6();
            const double c = 0.5;
            DoubleLoopConfig cfg;
            cfg.chain.lambda = c * c;
            cfg.inner = InnerSampler::chain;
            DoubleLoopStepper step(g, cfg);
            Rng rng(12);
            Matching x(6);
            for (int t = 0; t < 10000; ++t) step(x, rng);
            std::map<std::string, std::uint64_t> counts;
            for (int i = 0; i < 1000000; ++i) {
                step(x, rng);
                ++counts[x.vertex_set().to_hex()];
            }
            const double tv =
                tv_distance(DistributionTable::from_counts(StateKind::vertex_set, counts), vertex_double_law(g, c));
            o.check(tv <= 0.03, "double-loop on K6 minus an edge, c = 0.5, 1e6 samples vs c^2|S| Haf^2: TV " + f6(tv) +
                                    ", inner failures " + std::to_string(step.inner_failures()));
        }
    });

    criterion(4, "inner-sampler uniformity", 120, [](Outcome& o) {
        for (const auto& [name, spec] : std::vector<std::pair<std::string, GeneratorSpec>>{
                 {"K4", GeneratorSpec::complete(4)}, {"K33", GeneratorSpec::complete_bipartite(3, 3)}}) {
            const Graph g = gen_graph(spec, 0);
            const auto pms = enumerate_perfect_matchings(g);
            Rng rng(21);
            std::map<std::string, int> counts;
            const int n = 100000;
            int failed = 0;
            for (int i = 0; i < n; ++i) {
                const auto m = sample_perfect_matching(g, PMSamplerConfig{}, pms.front(), rng);
                if (!m) {
                    ++failed;
                    continue;
                }
                ++counts[m->key()];
            }
            double dev = 0.0;
            for (const auto& pm : pms)
                dev = std::max(dev, std::abs(counts[pm.key()] / double(n) - 1.0 / static_cast<double>(pms.size())));
            o.check(dev <= 0.01 && failed == 0 && counts.size() == pms.size(),
                    name + ": " + std::to_string(pms.size()) + " perfect matchings, max deviation " + f6(dev) +
                        ", failed draws " + std::to_string(failed));
        }
    });

    criterion(5, "rejection / double-loop agreement", 600, [](Outcome& o) {
        const Graph g = dense6();
        const double c = 0.5;
        const int n = 100000;
        ChainConfig cc;
        cc.lambda = c * c;
        cc.steps = 200;
        Rng rr(31);
        std::map<std::string, std::uint64_t> rej;
        std::uint64_t rounds = 0;
        for (int i = 0; i < n; ++i) {
            const auto r = rejection_sample(g, cc, 1'000'000, rr);
            rounds += r.rounds;
            ++rej[r.set.to_hex()];
        }
        DoubleLoopConfig dc;
        dc.chain.lambda = c * c;
        dc.inner = InnerSampler::chain;
        DoubleLoopStepper step(g, dc);
        Rng rd(32);
        Matching x(6);
        for (int t = 0; t < 10000; ++t) step(x, rd);
        std::map<std::string, std::uint64_t> dl;
        for (int i = 0; i < n; ++i) {
            for (int t = 0; t < 10; ++t) step(x, rd);
            ++dl[x.vertex_set().to_hex()];
        }
        const auto p = DistributionTable::from_counts(StateKind::vertex_set, rej);
        const auto q = DistributionTable::from_counts(StateKind::vertex_set, dl);
        const double tv = tv_distance(p, q);
        o.check(tv <= 0.05, "1e5 accepted rejection samples (" + std::to_string(rounds) + " rounds, 200 steps per chain)" +
                                " vs 1e5 double-loop samples: two-sample TV " + f6(tv));
        o.note("against the exact law: rejection " + f6(tv_distance(p, vertex_double_law(g, c))) + ", double-loop " +
               f6(tv_distance(q, vertex_double_law(g, c))));
    });

    criterion(6, "hard-instance escape law", 300, [](Outcome& o) {
        for (std::size_t n : {4u, 6u}) {
            const auto r = exit_time_experiment(n, 1.0, 200, 1, InnerSampler::exact);
            const double expected = 3.0 * (1.0 + std::ldexp(1.0, static_cast<int>(n))) * 2.0;
            const double rel = std::abs(r.mean - expected) / expected;
            o.check(rel <= 0.15 && r.censored == 0,
                    "n = " + std::to_string(n) + ": mean exit " + f6(r.mean) + " vs " + f6(expected) + " (" +
                        f6(100 * rel) + "% off), 95% CI [" + f6(r.ci_low) + ", " + f6(r.ci_high) + "]");
        }
        for (std::size_t n : {2u, 3u, 4u}) {
            const auto r = exit_time_experiment(n, 1.0, 200, 1, InnerSampler::exact);
            const auto gof = geometric_goodness_of_fit(r.exit_steps, r.exit_probability);
            o.check(gof.p_value >= 0.01, "n = " + std::to_string(n) + ": geometric fit chi2 " + f6(gof.chi_square) +
                                             " on " + std::to_string(gof.dof) + " dof, p = " + f6(gof.p_value));
        }
    });

    criterion(7, "solver enhancement on scaled G1, G3, G4", 1800, [](Outcome& o) {
        struct Row {
            std::string label, preset;
            std::optional<std::pair<Objective, std::size_t>> objective; // override of the preset
            bool annealing;
        };
        const std::vector<Row> rows = {
            {"G1 hafnian k=8 RS", "fig2a", {}, false},
            {"G1 hafnian k=8 SA", "fig2b", {}, true},
            {"G1 density k=20 RS", "fig2a", std::pair{Objective::density, std::size_t{20}}, false},
            {"G1 density k=20 SA", "fig2b", std::pair{Objective::density, std::size_t{20}}, true},
            {"G3 hafnian k=8 RS", "fig3a", std::pair{Objective::hafnian, std::size_t{8}}, false},
            {"G3 hafnian k=8 SA", "fig3a", std::pair{Objective::hafnian, std::size_t{8}}, true},
            {"G3 density k=10 RS", "fig3b", std::pair{Objective::density, std::size_t{10}}, false},
            {"G3 density k=10 SA", "fig3b", std::pair{Objective::density, std::size_t{10}}, true},
            {"G4 hafnian k=8 RS", "fig4a", {}, false},
            {"G4 hafnian k=8 SA", "fig4b", {}, true},
            {"G4 density k=20 RS", "fig4c", {}, false},
            {"G4 density k=20 SA", "fig4d", {}, true},
        };
        for (const auto& row : rows) {
            ExperimentSpec e = preset(row.preset);
            e.task = Task::solve;
            e.solve.annealing = row.annealing;
            if (row.objective) {
                e.solve.objective = row.objective->first;
                e.solve.k = row.objective->second;
            }
            e.validate();
            const auto res = compare(e);
            std::string line = row.label + " (" + std::to_string(e.solve.iterations) + " it): plain " + f6(res[0].mean());
            bool ok = true;
            for (std::size_t i = 1; i < res.size(); ++i) {
                line += ", " + sampler_name(res[i].sampler) + " " + f6(res[i].mean()) + " (c=" + f6(res[i].c) + ")";
                ok = ok && res[i].mean() >= res[0].mean();
            }
            o.check(ok, line);
        }
    });

    criterion(8, "sparse regime: plain RS fails, enhanced RS succeeds on scaled G5", 900, [](Outcome& o) {
        ExperimentSpec e = preset("fig5a");
        e.solve.iterations = 200;
        e.validate();
        const Graph g = gen_graph(e.graph, e.graph_seed);
        o.note("G5: " + std::to_string(g.n_vertices()) + " vertices, " + std::to_string(g.n_edges()) +
               " edges, k = " + std::to_string(e.solve.k) + ", 200 iterations, 10 seeds");
        const auto res = compare(e);
        const auto count = [](const VariantResult& v, bool positive) {
            int n = 0;
            for (double b : v.best) n += positive ? b > 0 : b == 0;
            return n;
        };
        const int zero = count(res[0], false);
        o.check(zero >= 8, "plain RS best hafnian 0 in " + std::to_string(zero) + "/10 seeds (mean best " +
                               f6(res[0].mean()) + ")");
        for (std::size_t i = 1; i < res.size(); ++i) {
            const int pos = count(res[i], true);
            o.check(pos >= 8, sampler_name(res[i].sampler) + " finds > 0 in " + std::to_string(pos) +
                                  "/10 seeds (mean best " + f6(res[i].mean()) + ")");
        }
    });

    criterion(9, "CLI determinism", 600, [](Outcome& o) {
        const fs::path root = fs::temp_directory_path() / "gbs_acceptance_cli";
        fs::remove_all(root);
        const std::vector<std::pair<std::string, std::string>> cmds = {
            {"gen-graph", "gen-graph planted-clique --n 40 --clique 6 --p 0.3 --seed 4 --out {}/g.txt"},
            {"sample", "sample --family er --n 10 --p 0.6 --graph-seed 2 --chain double-loop --c 0.7 --samples 300 "
                       "--seed 3 --out {}/samples.csv"},
            {"solve", "solve --family planted-clique --n 32 --clique 6 --p 0.2 --alg sa --sampler jerrum "
                      "--objective hafnian --k 6 --iters 60 --mixing 300 --seeds 3 --out-dir {}"},
            {"verify", "verify --family er --n 10 --p 0.6 --graph-seed 2 --law double --c 0.7 --samples "
                       "{}/../sample/samples.csv --out {}/verify.csv"},
            {"bench", "bench fig4a --scale 32 --seeds 2 --iters 40 --mixing 200 --seed 9 --out-dir {}"},
        };
        for (const auto& [name, tmpl] : cmds) {
            bool ran = true;
            for (const char* rep : {"a", "b"}) {
                const fs::path dir = root / rep / name;
                fs::create_directories(dir);
                std::string args = tmpl;
                for (std::size_t p; (p = args.find("{}")) != std::string::npos;) args.replace(p, 2, dir.string());
                ran = ran && run_cli(args) == 0;
            }
            std::size_t files = 0;
            const bool same = ran && same_tree(root / "a" / name, root / "b" / name, files);
            o.check(same, name + ": " + std::to_string(files) + " output files byte-identical across two runs");
        }
    });

    std::printf("%d criteria failed\n", failures);
    return failures;
}
