#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gbs/bench/experiment.hpp"

namespace fs = std::filesystem;
using namespace gbs;
using namespace gbs::bench;

namespace {

struct Run {
    int status = -1;
    std::string out;
};

Run cli(const std::string& args) {
    const std::string cmd = std::string(GBS_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
    const int raw = pclose(p);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("gbs_bench_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

} // namespace

TEST(Stats, QuantileAndBand) {
    EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile({5}, 0.9), 5.0);
    EXPECT_DOUBLE_EQ(quantile({0, 10}, 0.025), 0.25);
    const Band b = summarize({1, 2, 3, 4, 5});
    EXPECT_EQ(b.count, 5u);
    EXPECT_DOUBLE_EQ(b.mean, 3.0);
    EXPECT_NEAR(b.std_error, std::sqrt(2.5 / 5.0), 1e-12);
    EXPECT_NEAR(b.se_high - b.mean, 1.96 * b.std_error, 1e-12);
    EXPECT_DOUBLE_EQ(b.pct_low, 1.1);
    EXPECT_DOUBLE_EQ(b.pct_high, 4.9);
    // FNV-1a reference values
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
}

TEST(Csv, RoundTripAndRejectsBadFields) {
    CsvTable t{{"a", "b"}, {{"1", fmt(0.1)}, {"x", fmt(std::numeric_limits<double>::infinity())}}};
    const auto back = parse_csv(t.str());
    EXPECT_EQ(back.header, t.header);
    EXPECT_EQ(back.rows, t.rows);
    EXPECT_EQ(to_double(back.rows[0][1]), 0.1);
    EXPECT_TRUE(std::isinf(to_double(back.rows[1][1])));
    CsvTable bad{{"a"}, {{"1,2"}}};
    EXPECT_THROW(bad.str(), Error);
    CsvTable ragged{{"a", "b"}, {{"1"}}};
    EXPECT_THROW(ragged.str(), Error);
}

TEST(ExperimentSpec, StrictParsing) {
    const json ok = json::parse(R"({"name":"t","task":"solve","graph":{"family":"er","n":12,"p":0.5},
        "seeds":2,"solve":{"objective":"density","k":4,"iterations":10,"samplers":["glauber"]}})");
    const auto e = ExperimentSpec::from_json(ok);
    EXPECT_EQ(ExperimentSpec::from_json(e.to_json()).to_json(), e.to_json());

    auto bad = ok;
    bad["colour"] = "red";
    EXPECT_THROW(ExperimentSpec::from_json(bad), ConfigError);
    bad = ok;
    bad["solve"]["gamma"] = 1.5;
    EXPECT_THROW(ExperimentSpec::from_json(bad), ConfigError);
    bad = ok;
    bad["solve"]["objective"] = "hafnian";
    bad["solve"]["k"] = 5;
    EXPECT_THROW(ExperimentSpec::from_json(bad), ConfigError);
    bad = ok;
    bad["solve"]["samplers"] = json::array({"metropolis"});
    EXPECT_THROW(ExperimentSpec::from_json(bad), ConfigError);
    bad = ok;
    bad["exit_time"] = json::object();
    EXPECT_THROW(ExperimentSpec::from_json(bad), ConfigError);
    bad = ok;
    bad["graph"]["n"] = -3;
    EXPECT_THROW(ExperimentSpec::from_json(bad), ConfigError);
}

TEST(Presets, ScaledSizes) {
    const auto z = scaled_sizes(64);
    EXPECT_EQ(z.k_hafnian, 8u);
    EXPECT_EQ(z.clique, 8u);
    EXPECT_EQ(z.k_density, 20u);
    const auto full = scaled_sizes(256);
    EXPECT_EQ(full.k_hafnian, 16u);
    EXPECT_EQ(full.k_density, 80u);
    EXPECT_EQ(*figure_preset("fig2a", 256).at(0).solve.c, 0.1);
    EXPECT_FALSE(figure_preset("fig2a", 64).at(0).solve.c);
    EXPECT_EQ(figure_preset("fig3", 64).size(), 2u);
    EXPECT_THROW(figure_preset("fig6a", 64), ConfigError);
}

TEST(Cli, GenGraph) {
    auto r = cli("gen-graph complete --n 4");
    EXPECT_EQ(r.status, 0);
    EXPECT_EQ(r.out, "4 6 1\n");
    r = cli("gen-graph hard-instance --squares 3");
    EXPECT_EQ(r.status, 0);
    EXPECT_EQ(r.out.substr(0, 6), "12 18 ");
    r = cli("gen-graph complete-bipartite --n 3 --m 4");
    EXPECT_EQ(r.out.substr(0, 5), "7 12 ");

    const auto d = scratch("gen");
    ASSERT_EQ(cli("gen-graph er --n 40 --p 0.3 --seed 5 --out " + (d / "a.txt").string()).status, 0);
    ASSERT_EQ(cli("gen-graph er --n 40 --p 0.3 --seed 5 --out " + (d / "b.txt").string()).status, 0);
    ASSERT_EQ(cli("gen-graph er --n 40 --p 0.3 --seed 6 --out " + (d / "c.txt").string()).status, 0);
    EXPECT_EQ(slurp(d / "a.txt"), slurp(d / "b.txt"));
    EXPECT_NE(slurp(d / "a.txt"), slurp(d / "c.txt"));
    const Graph g = parse_edge_list(slurp(d / "a.txt"));
    EXPECT_EQ(g.n_vertices(), 40u);
}

TEST(Cli, SampleLinesAndSteps) {
    const auto r = cli("sample --family er --n 10 --p 0.5 --chain jerrum --samples 250 --steps 1000 --seed 2");
    ASSERT_EQ(r.status, 0);
    const auto ls = lines_of(r.out);
    ASSERT_EQ(ls.size(), 250u);
    EXPECT_EQ(ls.front().substr(0, ls.front().find(',')), "4");
    EXPECT_EQ(ls.back().substr(0, ls.back().find(',')), "1000");
    EXPECT_EQ(r.out, cli("sample --family er --n 10 --p 0.5 --chain jerrum --samples 250 --steps 1000 --seed 2").out);
}

TEST(Cli, PathGraphGlauberFrequencies) {
    // 0-1-2 at lambda = 1: the empty matching, {01} and {12} each have mass 1/3
    const auto d = scratch("path");
    {
        std::ofstream f(d / "p3.txt");
        f << "3 2\n0 1\n1 2\n";
    }
    const auto out = d / "s.txt";
    ASSERT_EQ(cli("sample --graph " + (d / "p3.txt").string() +
                  " --chain glauber --lambda 1 --samples 1000000 --steps 10000000 --seed 7 --out " + out.string())
                  .status,
              0);
    std::map<std::string, double> freq;
    const auto ls = lines_of(slurp(out));
    ASSERT_EQ(ls.size(), 1000000u);
    for (const auto& l : ls) freq[l.substr(l.find(',') + 1)] += 1.0 / static_cast<double>(ls.size());
    ASSERT_EQ(freq.size(), 3u);
    for (const auto& [k, f] : freq) EXPECT_NEAR(f, 1.0 / 3.0, 0.005) << k;
}

TEST(Cli, VerifyAgainstExactLaws) {
    const auto d = scratch("verify");
    const std::string graph = "--family er --n 6 --p 0.7 --graph-seed 3";
    ASSERT_EQ(cli("sample " + graph + " --chain glauber --c 0.8 --samples 100000 --steps 2000000 --seed 1 --out " +
                  (d / "g.txt").string())
                  .status,
              0);
    auto r = cli("verify " + graph + " --law single --c 0.8 --samples " + (d / "g.txt").string() + " --out " +
                 (d / "cmp.csv").string());
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_LE(std::stod(r.out.substr(3)), 0.03) << r.out;
    const auto cmp = parse_csv(slurp(d / "cmp.csv"));
    EXPECT_EQ(cmp.header, (std::vector<std::string>{"state_encoding", "empirical", "exact"}));

    ASSERT_EQ(cli("sample " + graph + " --chain double-loop --c 0.8 --samples 50000 --steps 500000 --seed 1 --out " +
                  (d / "d.txt").string())
                  .status,
              0);
    r = cli("verify " + graph + " --law double --c 0.8 --samples " + (d / "d.txt").string());
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_LE(std::stod(r.out.substr(3)), 0.03) << r.out;
    // the single-loop samples are far from the double law
    EXPECT_EQ(cli("verify " + graph + " --law double --c 0.8 --max-tv 0.03 --samples " + (d / "g.txt").string()).status,
              1);
}

TEST(Cli, SolveRecord) {
    const auto d = scratch("solve");
    const auto r = cli("solve --family er --n 20 --p 0.4 --alg sa --sampler glauber --objective density --k 6 "
                       "--iters 30 --mixing 100 --gamma 0.9 --seeds 2 --out-dir " +
                       d.string());
    ASSERT_EQ(r.status, 0);
    const json rec = json::parse(slurp(d / "record.json"));
    EXPECT_EQ(rec["annealing"]["gamma"].get<double>(), 0.9);
    EXPECT_EQ(rec["sampler"], "glauber");
    EXPECT_EQ(rec["runs"].size(), 2u);
    EXPECT_EQ(rec["config_hash"].get<std::string>().size(), 16u);
    const auto traj = parse_csv(slurp(d / "trajectory.csv"));
    EXPECT_EQ(traj.header, (std::vector<std::string>{"config_hash", "seed", "iteration", "best"}));
    EXPECT_EQ(traj.rows.size(), 60u);
}

TEST(Cli, OutputRootFromEnvironment) {
    const auto d = scratch("env");
    const std::string cmd = "GBS_OUTPUT_ROOT=" + d.string() + " " + GBS_CLI_PATH +
                            " solve --family complete --n 6 --k 4 --iters 3 >/dev/null 2>&1";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(d / "solve" / "record.json"));
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(cli("gen-graph er --n 10 --p 0.5 --bogus 1").status, 2);
    EXPECT_EQ(cli("gen-graph er --n 10 --p 1.5").status, 2);
    EXPECT_EQ(cli("solve --family complete --n 8 --alg sa --gamma 1.5 --k 4 --iters 5").status, 2);
    EXPECT_EQ(cli("solve --family complete --n 8 --objective hafnian --k 3").status, 2);
    EXPECT_EQ(cli("sample --graph /nonexistent/graph.txt").status, 2);
    EXPECT_EQ(cli("bench fig9z").status, 2);
    EXPECT_EQ(cli("sample --family complete --n 8 --lambda 1e-12 --samples 3 --steps 30 --post-select-k 4").status, 3);
    EXPECT_EQ(cli("solve --family complete --n 8 --sampler double-loop --inner exact --k 4 --iters 2").status, 0);
}

TEST(Bench, ExitTimeRunIsDeterministicAndReplotsByteStably) {
    const auto a = scratch("exit_a"), b = scratch("exit_b");
    const std::string args = "bench exit-time --squares 4 --lambda 1 --trials 200 --seed 1 --out-dir ";
    auto r = cli(args + a.string());
    ASSERT_EQ(r.status, 0) << r.out;
    ASSERT_EQ(cli(args + b.string()).status, 0);
    for (const char* f : {"exit_times.csv", "exit_summary.csv", "manifest.json", "exit_times.svg"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;

    const auto summary = parse_csv(slurp(a / "exit_summary.csv"));
    const double mean = to_double(summary.rows.at(0)[summary.column("mean")]);
    EXPECT_DOUBLE_EQ(to_double(summary.rows.at(0)[summary.column("expected_mean")]), 102.0);
    EXPECT_GE(mean, 87.0);
    EXPECT_LE(mean, 117.0);

    const std::string svg = slurp(a / "exit_times.svg");
    fs::remove(a / "exit_times.svg");
    ASSERT_EQ(cli("replot " + a.string()).status, 0);
    EXPECT_EQ(slurp(a / "exit_times.svg"), svg);
    const json m = json::parse(slurp(a / "manifest.json"));
    EXPECT_FALSE(m.dump().find("wall") != std::string::npos);
}

TEST(Bench, SolveSpecTables) {
    const auto d = scratch("spec");
    {
        std::ofstream f(d / "spec.json");
        f << R"({"name":"tiny","task":"solve","graph":{"family":"er","n":16,"p":0.5,"seed":2},"seed":4,"seeds":3,
                 "solve":{"algorithm":"rs","objective":"density","k":4,"iterations":25,"samplers":["jerrum"],
                 "mixing":50}})";
    }
    const auto out = d / "out";
    ASSERT_EQ(cli("bench --spec " + (d / "spec.json").string() + " --out-dir " + out.string()).status, 0);
    const auto trials = parse_csv(slurp(out / "trials.csv"));
    EXPECT_EQ(trials.rows.size(), 6u); // uniform baseline and jerrum, 3 seeds each
    const auto curves = parse_csv(slurp(out / "curves.csv"));
    EXPECT_EQ(curves.rows.size(), 6u * 25u);
    const auto summary = parse_csv(slurp(out / "summary.csv"));
    EXPECT_EQ(summary.rows.size(), 2u * 25u);
    const json m = json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(m["experiment"]["name"], "tiny");
    EXPECT_TRUE(m.contains("fugacity_c"));
    const std::string svg = slurp(out / "summary.svg");
    ASSERT_EQ(cli("replot " + out.string()).status, 0);
    EXPECT_EQ(slurp(out / "summary.svg"), svg);
}
