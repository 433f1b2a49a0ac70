#include <gtest/gtest.h>

#include <sstream>

#include "gbs/diagnostics.hpp"
#include "gbs/generators.hpp"

using namespace gbs;

namespace {

DistributionTable table(std::map<std::string, double> m) {
    return DistributionTable::from_masses(StateKind::vertex_set, std::move(m));
}

DistributionTable random_table(Rng& rng, std::size_t support) {
    std::map<std::string, double> m;
    double z = 0.0;
    for (std::size_t i = 0; i < support; ++i) {
        if (rng.bernoulli(0.3)) continue;
        const double w = rng.uniform();
        m[std::to_string(i)] = w;
        z += w;
    }
    if (m.empty()) m["0"] = z = 1.0;
    for (auto& [k, v] : m) v /= z;
    // push the round-off into the first entry so the masses sum to one
    double s = 0.0;
    for (auto& [k, v] : m) s += v;
    m.begin()->second += 1.0 - s;
    return table(m);
}

} // namespace

TEST(ExactStationary, EdgelessGraphIsPointMassOnEmpty) {
    const Graph g(5, {});
    for (auto law : {StationaryLaw::matching_single, StationaryLaw::matching_double}) {
        const auto t = exact_stationary(g, 2.0, law);
        ASSERT_EQ(t.size(), 1u);
        EXPECT_EQ(t.support()[0], "-");
        EXPECT_EQ((*t.exact())[0], 1);
    }
    const auto v = exact_stationary(g, 2.0, StationaryLaw::vertexset_double);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v.support()[0], VertexSet(5).to_hex());
}

TEST(ExactStationary, PathWithTwoEdgesIsUniform) {
    const auto t = exact_stationary(path_graph(3), 1.0, StationaryLaw::matching_single);
    ASSERT_EQ(t.size(), 3u);
    for (const auto& p : *t.exact()) EXPECT_EQ(p, Rational(1, 3));
}

TEST(ExactStationary, TriangleDoubleLawAtUnitC) {
    // c = 1: weights Haf^2 are 1 on the empty set and on each of the three edges
    const auto t = exact_stationary(gen_graph(GeneratorSpec::complete(3), 0), 1.0, StationaryLaw::vertexset_double);
    ASSERT_EQ(t.size(), 4u);
    for (const auto& p : *t.exact()) EXPECT_EQ(p, Rational(1, 4));
}

TEST(ExactStationary, Guards) {
    EXPECT_THROW(exact_stationary(path_graph(13), 1.0, StationaryLaw::matching_single), GuardExceeded);
    EXPECT_THROW(exact_stationary(path_graph(15), 1.0, StationaryLaw::vertexset_single), GuardExceeded);
    EXPECT_NO_THROW(exact_stationary(path_graph(14), 1.0, StationaryLaw::vertexset_double));
}

TEST(ExactStationary, SingleVertexLawIsAggregatedMatchingLaw) {
    const Graph g = gen_graph(GeneratorSpec::erdos_renyi(9, 0.5), 6);
    const double c = 0.75;
    const auto direct = exact_stationary(g, c * c, StationaryLaw::vertexset_single);
    const auto agg = aggregate_to_vertex_sets(exact_stationary(g, c * c, StationaryLaw::matching_single), 9);
    ASSERT_EQ(direct.size(), agg.size());
    for (std::size_t i = 0; i < agg.size(); ++i) {
        EXPECT_EQ(direct.support()[i], agg.support()[i]);
        EXPECT_EQ((*direct.exact())[i], (*agg.exact())[i]);
    }
}

TEST(ExactStationary, DoubleLawIsSquareOfSingleFactor) {
    // single: c^|S| Haf(S); double: c^(2|S|) Haf(S)^2, so double / single^2 is constant
    const Graph g = gen_graph(GeneratorSpec::erdos_renyi(8, 0.6), 2);
    const double c = 0.5;
    const auto single = exact_stationary(g, c * c, StationaryLaw::vertexset_single);
    const auto dbl = exact_stationary(g, c * c, StationaryLaw::vertexset_double);
    ASSERT_EQ(single.size(), dbl.size());
    const Rational ratio = (*dbl.exact())[0] / ((*single.exact())[0] * (*single.exact())[0]);
    for (std::size_t i = 0; i < dbl.size(); ++i)
        EXPECT_EQ((*dbl.exact())[i], ratio * (*single.exact())[i] * (*single.exact())[i]);
}

TEST(TvDistance, TrivialCases) {
    const auto p = table({{"a", 0.5}, {"b", 0.5}});
    EXPECT_EQ(tv_distance(p, p), 0.0);
    EXPECT_DOUBLE_EQ(tv_distance(table({{"a", 1.0}}), table({{"b", 1.0}})), 1.0);
    EXPECT_DOUBLE_EQ(tv_distance(p, table({{"a", 0.75}, {"b", 0.25}})), 0.25);
}

TEST(TvDistance, IsAMetricOnRandomTables) {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = random_table(rng, 12), q = random_table(rng, 12), r = random_table(rng, 12);
        EXPECT_NEAR(tv_distance(p, q), tv_distance(q, p), 1e-15);
        EXPECT_LE(tv_distance(p, r), tv_distance(p, q) + tv_distance(q, r) + 1e-15);
        EXPECT_LE(tv_distance(p, q), 1.0);
        EXPECT_EQ(tv_distance(p, p), 0.0);
    }
}

TEST(DistributionTable, CsvExport) {
    const auto t = exact_stationary(path_graph(3), 1.0, StationaryLaw::matching_single);
    std::ostringstream out;
    t.write_csv(out);
    EXPECT_EQ(out.str(),
              "state_encoding,probability\n"
              "-,0.33333333333333331\n"
              "0-1,0.33333333333333331\n"
              "1-2,0.33333333333333331\n");
}

TEST(DistributionTable, RejectsBadMasses) {
    EXPECT_THROW(table({{"a", 0.5}}), ConfigError);
    EXPECT_THROW(table({{"a", 1.5}, {"b", -0.5}}), ConfigError);
}

TEST(MixingCurve, CheckpointZeroIsTheStartState) {
    const Graph g = gen_graph(GeneratorSpec::complete(4), 0);
    const auto law = exact_stationary(g, 1.0, StationaryLaw::matching_single);
    const auto curve = mixing_curve(
        Matching(4), [&] { return [&](Matching& x, Rng& r) { glauber_step_inplace(g, x, 1.0, false, r); }; }, law,
        {0}, 50, 1);
    ASSERT_EQ(curve.size(), 1u);
    EXPECT_DOUBLE_EQ(curve[0].tv, tv_distance(DistributionTable::from_masses(StateKind::matching, {{"-", 1.0}}), law));
}

TEST(MixingCurve, SingleLoopOnK6ConvergesWithinNoiseBand) {
    const Graph g = gen_graph(GeneratorSpec::complete(6), 0);
    const auto law = exact_stationary(g, 1.0, StationaryLaw::matching_single);
    const auto make = [&] { return [&](Matching& x, Rng& r) { glauber_step_inplace(g, x, 1.0, false, r); }; };
    const auto curve = mixing_curve(Matching(6), make, law, {10, 100, 100000}, 2000, 5);
    // by step 100 the chain is already at the replica noise floor (~0.07 for 76 states
    // and 2000 replicas), so later checkpoints may only wander inside that band
    EXPECT_GT(curve[0].tv, curve[2].tv);
    EXPECT_LT(curve[2].tv, curve[1].tv + 0.03);
    EXPECT_LT(curve[2].tv, 0.1);
    // thread count does not change results
    const auto serial = mixing_curve(Matching(6), make, law, {10, 100}, 2000, 5, 1);
    const auto threaded = mixing_curve(Matching(6), make, law, {10, 100}, 2000, 5, 3);
    for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_EQ(threaded[i].tv, serial[i].tv);
}

TEST(MixingCurve, HardInstanceStartedInClassBRarelyReachesM0) {
    const std::size_t n = 6;
    const double lambda = 6.0;
    const Graph g = gen_graph(GeneratorSpec::hard_instance(n), 0);
    const Matching m0 = hard_instance_m0(n);

    // stationary share of M_0 by full enumeration of the matchings
    EnumerationLimits lim;
    lim.cap = 5'000'000;
    double z = 0.0, w0 = 0.0;
    for (const auto& x : enumerate_matchings(g, lim)) {
        const double w = std::pow(lambda * lambda, static_cast<double>(x.size())) * hafnian(g, x.vertex_set()).to_double();
        z += w;
        if (x == m0) w0 = w;
    }
    const double share = w0 / z;

    Matching start(4 * n);
    for (std::size_t i = 0; i < n; ++i) {
        start.add(hard_instance_vertex(i, 1), hard_instance_vertex(i, 2));
        start.add(hard_instance_vertex(i, 3), hard_instance_vertex(i, 4));
    }
    DoubleLoopConfig cfg;
    cfg.chain.lambda = lambda;
    cfg.inner = InnerSampler::exact;
    const std::size_t replicas = 1000;
    std::size_t at_m0 = 0;
    for (std::size_t r = 0; r < replicas; ++r) {
        Rng rng(derive_seed(23, r));
        DoubleLoopStepper step(g, cfg);
        Matching x = start;
        for (int t = 0; t < 1000; ++t) step(x, rng);
        at_m0 += x == m0;
    }
    EXPECT_LT(static_cast<double>(at_m0) / replicas, share / 2.0) << "share=" << share;
}

TEST(ExitTime, MeanAndGeometricFitOnSmallInstance) {
    const auto res = exit_time_experiment(2, 1.0, 2000, 99);
    EXPECT_DOUBLE_EQ(res.expected_mean, 30.0);
    EXPECT_EQ(res.censored, 0u);
    EXPECT_NEAR(res.mean, 30.0, 3.0);
    EXPECT_LT(res.ci_low, res.ci_high);
    const auto fit = geometric_goodness_of_fit(res.exit_steps, res.exit_probability);
    EXPECT_GT(fit.p_value, 0.01);
    EXPECT_GE(fit.bins, 5u);
    // the same samples are incompatible with a rate twice as large
    EXPECT_LT(geometric_goodness_of_fit(res.exit_steps, 2.0 * res.exit_probability).p_value, 1e-6);
}

TEST(ExitTime, DeterministicAcrossThreadCounts) {
    const auto a = exit_time_experiment(3, 1.0, 50, 4, InnerSampler::exact, 100000, 1);
    const auto b = exit_time_experiment(3, 1.0, 50, 4, InnerSampler::exact, 100000, 3);
    EXPECT_EQ(a.exit_steps, b.exit_steps);
}

TEST(GoodnessOfFit, ExactGeometricSampleFitsWell) {
    Rng rng(8);
    std::vector<std::uint64_t> s;
    for (int i = 0; i < 5000; ++i) {
        std::uint64_t k = 1;
        while (!rng.bernoulli(0.1)) ++k;
        s.push_back(k);
    }
    EXPECT_GT(geometric_goodness_of_fit(s, 0.1).p_value, 0.01);
}
