#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "gnies/errors.hpp"
#include "gnies/graph_algorithms.hpp"
#include "gnies/random.hpp"
#include "gnies/scm.hpp"
#include "gnies/score.hpp"
#include "oracles.hpp"

namespace gnies {
namespace {

SufficientStats simulate(const GenParams &gp, int n, std::uint64_t seed,
                         std::vector<Eigen::MatrixXd> *raw = nullptr) {
    const auto gen = random_scm(gp);
    std::vector<Eigen::MatrixXd> data;
    for (int e = 0; e < gen.model.num_envs(); ++e) {
        data.push_back(sample(gen.model, e, n, derive_seed(seed, e)));
    }
    if (raw) *raw = data;
    return sufficient_stats(data);
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

TEST(SufficientStatsTest, Examples) {
    Eigen::MatrixXd X(3, 2);
    X << 1, 5, 2, 5, 3, 5;
    const auto s = sufficient_stats({X});
    EXPECT_DOUBLE_EQ(s.sigmas[0](1, 1), 0.0);
    EXPECT_DOUBLE_EQ(s.sigmas[0](0, 1), 0.0);
    EXPECT_DOUBLE_EQ(s.sigmas[0](0, 0), 2.0 / 3.0);

    Eigen::MatrixXd same(2, 2);
    same << 1, 2, 1, 2;
    EXPECT_TRUE(sufficient_stats({same}).sigmas[0].isZero());
}

TEST(SufficientStatsTest, PooledIsWeightedAverage) {
    std::vector<Eigen::MatrixXd> raw;
    const auto s = simulate({.p = 4, .n_envs = 2, .seed = 2}, 100, 3, &raw);
    const auto twice = sufficient_stats({raw[0], raw[0], raw[1]});
    const Eigen::MatrixXd expected = (2.0 * s.sigmas[0] + s.sigmas[1]) / 3.0;
    EXPECT_TRUE(twice.pooled().isApprox(expected, 1e-14));
    EXPECT_EQ(twice.total(), 300);
}

TEST(SufficientStatsTest, Errors) {
    EXPECT_THROW(sufficient_stats({}), DataError);
    EXPECT_THROW(sufficient_stats({Eigen::MatrixXd::Zero(1, 3)}), DataError);
    EXPECT_THROW(sufficient_stats({Eigen::MatrixXd::Zero(4, 3), Eigen::MatrixXd::Zero(4, 2)}),
                 DataError);
}

TEST(LocalMleTest, SingleEnvironmentMatchesOls) {
    std::vector<Eigen::MatrixXd> raw;
    const auto s = simulate({.p = 5, .avg_degree = 2.0, .n_envs = 1, .seed = 4}, 500, 5, &raw);
    for (int node = 0; node < 5; ++node) {
        for (auto parents : {NodeSet{}, NodeSet{(node + 1) % 5}, NodeSet{(node + 1) % 5, (node + 3) % 5}}) {
            for (bool intervened : {false, true}) {
                const auto mle = local_mle({node, parents, intervened}, s);
                const auto [coef, var] = oracle::ols(raw[0], node, parents.to_vector());
                ASSERT_EQ(mle.omegas.size(), 1u);
                EXPECT_NEAR(mle.omegas[0], var, 1e-12 * std::max(1.0, var));
                for (int a = 0; a < coef.size(); ++a) EXPECT_NEAR(mle.b(a), coef(a), 1e-12);
            }
        }
    }
}

TEST(LocalMleTest, InterventedWithoutParentsIsExact) {
    const auto s = simulate({.p = 4, .n_envs = 3, .seed = 6}, 50, 7);
    const auto mle = local_mle({2, {}, true}, s);
    EXPECT_EQ(mle.iterations, 0);
    ASSERT_EQ(mle.omegas.size(), 3u);
    for (int e = 0; e < 3; ++e) EXPECT_EQ(mle.omegas[e], s.sigmas[e](2, 2));
}

TEST(LocalMleTest, AlternatingMatchesIndependentMinimiser) {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        const auto s = simulate({.p = 3, .avg_degree = 2.0, .n_envs = 3, .seed = seed}, 100, seed + 50);
        const int node = static_cast<int>(seed % 3);
        const NodeSet parents = NodeSet::range(3) - NodeSet::single(node);
        const auto mle = local_mle({node, parents, true}, s);
        EXPECT_TRUE(mle.converged);
        const double ours = oracle::profiled_objective(s, node, parents.to_vector(),
                                                       {mle.b(0), mle.b(1)});
        const double reference = oracle::minimise_profiled_objective(s, node, parents.to_vector());
        EXPECT_NEAR(ours, reference, 1e-4);
        EXPECT_LE(ours, reference + 1e-4);
    }
}

TEST(LocalMleTest, ObjectiveNeverIncreases) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = simulate({.p = 5, .avg_degree = 2.5, .n_envs = 4, .seed = seed}, 30, seed);
        for (int node = 0; node < 5; ++node) {
            const auto mle = local_mle({node, NodeSet::range(5) - NodeSet::single(node), true}, s);
            for (std::size_t k = 1; k < mle.objective_trace.size(); ++k) {
                EXPECT_LE(mle.objective_trace[k],
                          mle.objective_trace[k - 1] + 1e-9 * std::abs(mle.objective_trace[k - 1]));
            }
        }
    }
}

TEST(LocalScoreTest, GaussianClosedForm) {
    // A sample with mean 0 and MLE variance exactly 1.
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    Eigen::MatrixXd X(100, 1);
    for (int r = 0; r < 100; ++r) X(r, 0) = z(rng);
    X.array() -= X.mean();
    X /= std::sqrt(X.squaredNorm() / 100.0);
    const auto s = sufficient_stats({X});
    const double lambda = 0.5 * std::log(100.0);
    const auto v = local_score({0, {}, false}, s, lambda);

    double density_sum = 0.0;
    for (int r = 0; r < 100; ++r) {
        density_sum += -0.5 * std::log(2 * std::numbers::pi) - 0.5 * X(r, 0) * X(r, 0);
    }
    EXPECT_NEAR(v.loglik, -50.0 * (std::log(2 * std::numbers::pi) + 1.0), 1e-10);
    EXPECT_NEAR(v.loglik, density_sum, 1e-10);
    EXPECT_NEAR(v.loglik, -141.894, 5e-4);
    EXPECT_NEAR(v.penalized, -144.196, 5e-4);
    EXPECT_EQ(v.dof, 1);
}

TEST(LocalScoreTest, DegreesOfFreedom) {
    EXPECT_EQ(local_dof({0, {1, 2}, true}, 3), 5);
    EXPECT_EQ(local_dof({0, {1, 2}, false}, 3), 3);
    EXPECT_EQ(local_dof({0, {}, true}, 1), 1);
}

TEST(LocalScoreTest, SingleEnvironmentMatchesBicOlsPath) {
    std::vector<Eigen::MatrixXd> raw;
    const auto s = simulate({.p = 5, .n_envs = 1, .seed = 8}, 300, 9, &raw);
    const double lambda = bic_lambda(s);
    for (int node = 0; node < 5; ++node) {
        const NodeSet parents = NodeSet::range(node);
        const auto [coef, var] = oracle::ols(raw[0], node, parents.to_vector());
        const double expected =
            -0.5 * 300 * (std::log(2 * std::numbers::pi) + std::log(var) + 1.0) -
            lambda * (parents.size() + 1);
        EXPECT_NEAR(local_score({node, parents, false}, s, lambda).penalized, expected,
                    1e-10 * std::abs(expected));
    }
}

TEST(LocalScoreTest, AddingParentNeverLowersLikelihood) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = simulate({.p = 5, .n_envs = 3, .seed = seed}, 80, seed);
        for (int node = 0; node < 5; ++node) {
            for (bool intervened : {false, true}) {
                const NodeSet others = NodeSet::range(5) - NodeSet::single(node);
                for_each_subset(others, [&](NodeSet pa) {
                    for (int extra : others - pa) {
                        const double base = local_score({node, pa, intervened}, s, 0).loglik;
                        const double more =
                            local_score({node, pa | NodeSet::single(extra), intervened}, s, 0).loglik;
                        EXPECT_GE(more, base - 1e-8 * std::abs(base));
                    }
                });
            }
        }
    }
}

TEST(FullScoreTest, DegreesOfFreedomFormula) {
    const auto s = simulate({.p = 3, .n_envs = 3, .seed = 1}, 40, 2);
    const Dag d(3, {{0, 1}, {1, 2}});
    EXPECT_EQ(full_score(d, {1}, s, 1.0).dof, 7);
}

TEST(FullScoreTest, DecomposesExactly) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int p = 3 + trial % 4;
        const auto s = simulate({.p = p, .n_envs = 3, .seed = static_cast<std::uint64_t>(trial)}, 30,
                                trial);
        const auto all = random_scm({.p = p, .avg_degree = 2.0, .n_envs = 1,
                                     .seed = static_cast<std::uint64_t>(trial + 1000)})
                             .model.graph();
        const TargetSet t = NodeSet::from_bits(rng() % (1u << p));
        const double lambda = 0.3 * (trial % 5);
        const auto total = full_score(all, t, s, lambda);
        double loglik = 0, penalized = 0;
        int dof = 0;
        for (int i = 0; i < p; ++i) {
            const auto v = local_score({i, all.parents(i), t.contains(i)}, s, lambda);
            loglik += v.loglik;
            penalized += v.penalized;
            dof += v.dof;
        }
        EXPECT_TRUE(same_bits(total.loglik, loglik));
        EXPECT_TRUE(same_bits(total.penalized, penalized));
        EXPECT_EQ(total.dof, dof);
        EXPECT_EQ(total.dof, all.num_edges() + p + t.size() * 2);
        EXPECT_NEAR(total.penalized, total.loglik - lambda * total.dof,
                    1e-12 * std::max(1.0, std::abs(total.penalized)));
    }
}

TEST(FullScoreTest, IEquivalentGraphsScoreEqually) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const int p = 4 + static_cast<int>(seed % 3);
        const auto gen = random_scm({.p = p, .avg_degree = 2.0, .n_envs = 3, .seed = seed});
        std::vector<Eigen::MatrixXd> data;
        for (int e = 0; e < 3; ++e) data.push_back(sample(gen.model, e, 200, seed * 10 + e));
        const auto s = sufficient_stats(data);
        const Dag truth = gen.model.graph();
        const GraphClass cls = enumerate_class(dag_to_icpdag(truth, gen.targets), gen.targets);
        const double ref = full_score(truth, gen.targets, s, bic_lambda(s)).penalized;
        for (const auto &d : cls.members()) {
            const double v = full_score(d, gen.targets, s, bic_lambda(s)).penalized;
            EXPECT_LE(std::abs(v - ref), 1e-6 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST(FullScoreTest, TinySamplesStayFinite) {
    const auto s = simulate({.p = 10, .n_envs = 5, .seed = 3}, 10, 4);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dag d = random_scm({.p = 10, .avg_degree = 6.0, .n_envs = 1, .seed = seed}).model.graph();
        const auto v = full_score(d, NodeSet::range(10), s, bic_lambda(s));
        EXPECT_TRUE(std::isfinite(v.penalized));
    }
    // Constant column: variance floor keeps the score finite.
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(20, 3);
    X.col(1).setConstant(2.0);
    const auto c = sufficient_stats({X});
    EXPECT_TRUE(std::isfinite(local_score({1, {0}, false}, c, 1.0).penalized));
    EXPECT_TRUE(local_mle({1, {0}, false}, c).variance_floored);
    EXPECT_TRUE(std::isfinite(local_score({0, {1, 2}, false}, c, 1.0).penalized));
}

TEST(ScoreCacheTest, StoresAndInvalidates) {
    ScoreCache cache;
    const ScoreValue v{-12.345678901234567, 3, -15.5};
    cache.put({1, {0, 2}, true}, v);
    const auto got = cache.get({1, {0, 2}, true});
    ASSERT_TRUE(got);
    EXPECT_TRUE(same_bits(got->loglik, v.loglik));
    EXPECT_TRUE(same_bits(got->penalized, v.penalized));
    EXPECT_FALSE(cache.get({1, {0, 2}, false}));
    cache.put({1, {}, false}, v);
    cache.put({2, {1}, false}, v);
    cache.invalidate_node(1);
    EXPECT_EQ(cache.size(), 1u);
    EXPECT_TRUE(cache.get({2, {1}, false}));
}

TEST(ScoreCacheTest, ScorerAgreesWithAndWithoutCache) {
    auto stats = std::make_shared<SufficientStats>(simulate({.p = 6, .n_envs = 3, .seed = 5}, 60, 6));
    const double lambda = bic_lambda(*stats);
    Scorer cached(stats, lambda, std::make_shared<ScoreCache>());
    Scorer plain(stats, lambda);
    for (int rep = 0; rep < 2; ++rep) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const Dag d = random_scm({.p = 6, .n_envs = 1, .seed = seed}).model.graph();
            const TargetSet t = NodeSet::from_bits(seed * 7 % 64);
            const auto a = cached.full(d, t), b = plain.full(d, t);
            EXPECT_TRUE(same_bits(a.penalized, b.penalized));
            EXPECT_TRUE(same_bits(a.penalized, full_score(d, t, *stats, lambda).penalized));
        }
    }
    EXPECT_GT(cached.cache()->hits(), 0u);
}

}  // namespace
}  // namespace gnies
