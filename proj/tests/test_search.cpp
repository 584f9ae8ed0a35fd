#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <random>

#include "gnies/errors.hpp"
#include "gnies/graph_algorithms.hpp"
#include "gnies/random.hpp"
#include "gnies/scm.hpp"
#include "gnies/search.hpp"

namespace gnies {
namespace {

struct Problem {
    GeneratedScm gen;
    std::shared_ptr<const SufficientStats> stats;
};

Problem simulate(const GenParams &gp, int n, std::uint64_t seed) {
    Problem pr{random_scm(gp), nullptr};
    std::vector<Eigen::MatrixXd> data;
    for (int e = 0; e < pr.gen.model.num_envs(); ++e) {
        data.push_back(sample(pr.gen.model, e, n, derive_seed(seed, e)));
    }
    pr.stats = std::make_shared<const SufficientStats>(sufficient_stats(data));
    return pr;
}

// A random I-CPDAG together with its target set.
std::pair<Pdag, TargetSet> random_state(std::mt19937_64 &rng, int p) {
    const Dag d = random_scm({.p = p, .avg_degree = std::uniform_real_distribution<>(0.0, 3.0)(rng),
                              .n_envs = 1, .seed = rng()})
                      .model.graph();
    const TargetSet t = NodeSet::from_bits(rng() % (std::uint64_t{1} << p)) &
                        NodeSet::from_bits(rng() % (std::uint64_t{1} << p));
    return {dag_to_icpdag(d, t), t};
}

TEST(OperatorTest, EmptyGraphInserts) {
    const auto ops = valid_inserts(Pdag(3));
    ASSERT_EQ(ops.size(), 6u);
    for (const auto &op : ops) EXPECT_TRUE(op.T.empty());
    EXPECT_TRUE(std::is_sorted(ops.begin(), ops.end()));
    EXPECT_TRUE(valid_deletes(Pdag(3)).empty());
}

TEST(OperatorTest, SingleUndirectedEdgeDeletes) {
    const Pdag c(2, {}, {{0, 1}});
    const auto ops = valid_deletes(c);
    ASSERT_EQ(ops.size(), 2u);
    EXPECT_EQ(ops[0], (DeleteOp{0, 1, {}}));
    EXPECT_EQ(ops[1], (DeleteOp{1, 0, {}}));
    EXPECT_EQ(apply_delete(c, ops[0]), Pdag(2));
}

TEST(OperatorTest, ChainOfUndirectedEdges) {
    // 0 - 1 - 2: the middle node is in NA(2,0), so it enters the parent set
    // of 2 without being listed in T.
    const Pdag c(3, {}, {{0, 1}, {1, 2}});
    const auto ops = valid_inserts(c);
    const InsertOp op{0, 2, {}};
    ASSERT_NE(std::find(ops.begin(), ops.end(), op), ops.end());
    EXPECT_EQ(na_yx(c, 2, 0), NodeSet{1});
    EXPECT_EQ(insert_parents(c, op).after, (NodeSet{0, 1}));
    EXPECT_EQ(insert_parents(c, op).before, NodeSet{1});
    EXPECT_FALSE(is_valid_insert(c, {0, 2, {1}}));
    // The completed result is the triangle with every edge undirected.
    const Pdag done = gnies_completion(apply_insert(c, op), {});
    EXPECT_EQ(done, Pdag(3, {}, {{0, 1}, {0, 2}, {1, 2}}));
}

TEST(OperatorTest, ApplyInsertIntoEmptyGraph) {
    const Pdag g = apply_insert(Pdag(3), {2, 0, {}});
    EXPECT_EQ(g, Pdag(3, {{2, 0}}, {}));
    EXPECT_THROW(apply_insert(g, {2, 0, {}}), InvalidArgument);
    EXPECT_THROW(apply_delete(g, {0, 2, {}}), InvalidArgument);
}

TEST(OperatorTest, InsertValidityMatchesDefinition) {
    // Collider 0 -> 2 <- 1 with 2 - 3: inserting 3 -> 0 is blocked only if a
    // semi-directed path 0 ~> 3 meets NA u T.
    const Pdag c(4, {{0, 2}, {1, 2}, {2, 3}}, {});
    EXPECT_FALSE(is_valid_insert(c, {3, 0, {}}));
    EXPECT_TRUE(is_valid_insert(c, {0, 3, {}}));
    EXPECT_TRUE(is_valid_insert(c, {0, 1, {}}));
}

TEST(OperatorTest, ListsAreLexicographic) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto [c, t] = random_state(rng, 6);
        const auto ins = valid_inserts(c);
        const auto del = valid_deletes(c);
        EXPECT_TRUE(std::adjacent_find(ins.begin(), ins.end(), [](auto &a, auto &b) {
                        return !(a < b);
                    }) == ins.end());
        EXPECT_TRUE(std::adjacent_find(del.begin(), del.end(), [](auto &a, auto &b) {
                        return !(a < b);
                    }) == del.end());
        for (const auto &op : ins) EXPECT_TRUE(is_valid_insert(c, op));
        for (const auto &op : del) EXPECT_TRUE(is_valid_delete(c, op));
    }
}

// Soundness against brute force on CPDAGs: some member of the current class
// plus (or minus) the edge x -> y, with y's parents as predicted, lies in the
// class produced by the operator.
TEST(OperatorTest, OperatorsMatchClassMembers) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 150; ++trial) {
        const int p = 4 + trial % 2;
        const auto [c, t] = random_state(rng, p);
        const GraphClass cls = enumerate_class(c, t);
        for (const auto &op : valid_inserts(c)) {
            const Pdag next = gnies_completion(apply_insert(c, op), t);
            const GraphClass target = enumerate_class(next, t);
            const auto pc = insert_parents(c, op);
            bool witnessed = false;
            for (const auto &d : cls.members()) {
                if (d.parents(op.y) != pc.before) continue;
                auto parents = std::vector<NodeSet>(p);
                for (int i = 0; i < p; ++i) parents[i] = d.parents(i);
                parents[op.y].insert(op.x);
                if (!is_acyclic(parents)) continue;
                witnessed |= target.contains(Dag::from_parents(parents));
            }
            EXPECT_TRUE(witnessed) << "insert " << op.x << "->" << op.y << " T=" << op.T.to_string();
        }
        for (const auto &op : valid_deletes(c)) {
            const Pdag next = gnies_completion(apply_delete(c, op), t);
            const GraphClass target = enumerate_class(next, t);
            const auto pc = delete_parents(c, op);
            bool witnessed = false;
            for (const auto &d : cls.members()) {
                if (d.parents(op.y) != pc.before) continue;
                auto parents = std::vector<NodeSet>(p);
                for (int i = 0; i < p; ++i) parents[i] = d.parents(i);
                parents[op.y].erase(op.x);
                witnessed |= target.contains(Dag::from_parents(parents));
            }
            EXPECT_TRUE(witnessed) << "delete " << op.x << "->" << op.y << " H=" << op.H.to_string();
        }
    }
}

// Completeness for plain CPDAGs: every single-edge addition to a member is
// reachable through some valid insert.
TEST(OperatorTest, InsertsReachEveryEdgeAddition) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 60; ++trial) {
        const Pdag c = dag_to_cpdag(pdag_to_dag(random_state(rng, 4).first));
        const GraphClass cls = enumerate_class(c, {});
        std::vector<Pdag> reachable;
        for (const auto &op : valid_inserts(c)) {
            reachable.push_back(gnies_completion(apply_insert(c, op), {}));
        }
        for (const auto &d : cls.members()) {
            for (int x = 0; x < 4; ++x) {
                for (int y = 0; y < 4; ++y) {
                    if (x == y || d.adjacent(x, y)) continue;
                    auto parents = std::vector<NodeSet>(4);
                    for (int i = 0; i < 4; ++i) parents[i] = d.parents(i);
                    parents[y].insert(x);
                    if (!is_acyclic(parents)) continue;
                    const Pdag want = dag_to_cpdag(Dag::from_parents(parents));
                    EXPECT_NE(std::find(reachable.begin(), reachable.end(), want), reachable.end());
                }
            }
        }
    }
}

TEST(OperatorTest, AppliedOperatorsAreExtendable) {
    std::mt19937_64 rng(7);
    int applied = 0;
    while (applied < 1000) {
        const auto [c, t] = random_state(rng, 7);
        const auto ins = valid_inserts(c);
        const auto del = valid_deletes(c);
        if (!ins.empty()) {
            const Pdag g = apply_insert(c, ins[rng() % ins.size()]);
            EXPECT_NO_THROW(pdag_to_dag(g));
            EXPECT_NO_THROW(gnies_completion(g, t));
            ++applied;
        }
        if (!del.empty()) {
            const Pdag g = apply_delete(c, del[rng() % del.size()]);
            EXPECT_NO_THROW(pdag_to_dag(g));
            EXPECT_NO_THROW(gnies_completion(g, t));
            ++applied;
        }
    }
}

TEST(ScoreDeltaTest, MatchesFullScoreDifference) {
    std::mt19937_64 rng(21);
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 500; ++seed) {
        const auto pr = simulate({.p = 6, .n_envs = 3, .seed = seed}, 50, seed);
        const Scorer scorer(pr.stats, bic_lambda(*pr.stats));
        for (int rep = 0; rep < 10; ++rep) {
            const auto [c, t] = random_state(rng, 6);
            const double before = scorer.full(pdag_to_dag(c), t).penalized;
            const auto ins = valid_inserts(c);
            const auto del = valid_deletes(c);
            if (!ins.empty()) {
                const auto op = ins[rng() % ins.size()];
                const Pdag next = gnies_completion(apply_insert(c, op), t);
                const double after = scorer.full(pdag_to_dag(next), t).penalized;
                EXPECT_NEAR(insert_score_delta(op, c, t, scorer), after - before, 1e-9);
                ++checked;
            }
            if (!del.empty()) {
                const auto op = del[rng() % del.size()];
                const Pdag next = gnies_completion(apply_delete(c, op), t);
                const double after = scorer.full(pdag_to_dag(next), t).penalized;
                EXPECT_NEAR(delete_score_delta(op, c, t, scorer), after - before, 1e-9);
                ++checked;
            }
        }
    }
}

TEST(TurnTest, Examples) {
    // 0 -> 1 with 1 intervened: turning gives 1 -> 0.
    const Pdag c(2, {{0, 1}}, {});
    const auto turns = valid_turns(c);
    ASSERT_EQ(turns.size(), 1u);
    EXPECT_EQ(turns[0], (TurnOp{1, 0, {}}));
    EXPECT_EQ(*apply_turn(c, turns[0]), Pdag(2, {{1, 0}}, {}));
    EXPECT_THROW(apply_turn(c, {0, 1, {}}), InvalidArgument);
    EXPECT_THROW(apply_turn(c, {1, 0, {1}}), InvalidArgument);
    // Turning 0 -> 2 in the collider 0 -> 2 <- 1 would need 2 -> 0 with 1 -> 2.
    const Pdag v(3, {{0, 2}, {1, 2}}, {});
    EXPECT_TRUE(apply_turn(v, {2, 0, {}}).has_value());
}

TEST(TurnTest, DeltaMatchesCompletedScore) {
    std::mt19937_64 rng(31);
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 300; ++seed) {
        const auto pr = simulate({.p = 6, .n_envs = 3, .seed = seed}, 50, seed);
        const Scorer scorer(pr.stats, bic_lambda(*pr.stats));
        const auto [c, t] = random_state(rng, 6);
        const auto turns = valid_turns(c);
        if (turns.empty()) continue;
        const auto op = turns[rng() % turns.size()];
        const Pdag next = gnies_completion(*apply_turn(c, op), t);
        EXPECT_TRUE(next.has_directed(op.x, op.y) || next.has_undirected(op.x, op.y));
        EXPECT_NEAR(turn_score_delta(op, c, t, scorer),
                    scorer.full(pdag_to_dag(next), t).penalized - scorer.full(pdag_to_dag(c), t).penalized,
                    1e-9);
        ++checked;
    }
}

TEST(InnerFitTest, WithoutTurningOnlyInsertsAndDeletes) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto pr = simulate({.p = 7, .n_envs = 3, .seed = seed}, 300, seed);
        const auto r = inner_fit(*pr.stats, pr.gen.targets, bic_lambda(*pr.stats), {.turning = false});
        for (const auto &s : r.trace) EXPECT_NE(s.kind, StepKind::turn);
        const auto again =
            inner_fit(*pr.stats, pr.gen.targets, bic_lambda(*pr.stats), {.start = r.icpdag, .turning = false});
        EXPECT_TRUE(again.trace.empty());
    }
}

TEST(ScoreDeltaTest, IndependentDataRejectsEdges) {
    int negative = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto pr = simulate({.p = 2, .avg_degree = 0.0, .n_envs = 1, .seed = seed}, 1000, seed);
        const Scorer scorer(pr.stats, bic_lambda(*pr.stats));
        negative += insert_score_delta({0, 1, {}}, Pdag(2), {}, scorer) < 0;
    }
    // P(chi2_1 > ln 1000) is below 0.01.
    EXPECT_GE(negative, 95);
}

TEST(ScoreDeltaTest, TrueEdgeOfChainIsRewarded) {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, 2);
    B(1, 0) = 0.8;
    Eigen::VectorXd w(2);
    w << 1.0, 1.0;
    const auto m = make_scm(B, {w});
    const Scorer scorer(std::make_shared<const SufficientStats>(sufficient_stats({sample(m, 0, 1000, 3)})),
                        0.5 * std::log(1000.0));
    EXPECT_GT(insert_score_delta({0, 1, {}}, Pdag(2), {}, scorer), 0.0);
    EXPECT_GT(insert_score_delta({1, 0, {}}, Pdag(2), {}, scorer), 0.0);
}

TEST(InnerFitTest, EmptyModelGivesEmptyGraph) {
    const auto pr = simulate({.p = 5, .avg_degree = 0.0, .n_envs = 1, .seed = 1}, 5000, 2);
    const auto r = inner_fit(*pr.stats, {}, bic_lambda(*pr.stats));
    EXPECT_EQ(r.icpdag, Pdag(5));
    EXPECT_TRUE(r.trace.empty());
}

TEST(InnerFitTest, TraceIsMonotoneAndFixpointHolds) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto pr = simulate({.p = 7, .n_envs = 3, .seed = seed}, 300, seed);
        const Scorer scorer(pr.stats, bic_lambda(*pr.stats), std::make_shared<ScoreCache>());
        const TargetSet t = pr.gen.targets;
        const auto r = inner_fit(scorer, t);
        double prev = scorer.full(Dag(7), t).penalized;
        for (const auto &s : r.trace) {
            EXPECT_GT(s.score, prev);
            EXPECT_NEAR(s.score - prev, s.delta, 1e-9);
            prev = s.score;
        }
        EXPECT_EQ(r.score.penalized, prev);
        EXPECT_EQ(r.icpdag, dag_to_icpdag(pdag_to_dag(r.icpdag), t));

        const auto again = inner_fit(scorer, t, {.start = r.icpdag});
        EXPECT_TRUE(again.trace.empty());
        EXPECT_EQ(again.icpdag, r.icpdag);
    }
}

TEST(InnerFitTest, CacheDoesNotChangeResults) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto pr = simulate({.p = 6, .n_envs = 3, .seed = seed}, 200, seed);
        const double lambda = bic_lambda(*pr.stats);
        const auto a = inner_fit(Scorer(pr.stats, lambda, std::make_shared<ScoreCache>()), pr.gen.targets);
        const auto b = inner_fit(Scorer(pr.stats, lambda), pr.gen.targets);
        EXPECT_EQ(a.icpdag, b.icpdag);
        EXPECT_EQ(a.trace, b.trace);
        EXPECT_EQ(std::memcmp(&a.score.penalized, &b.score.penalized, sizeof(double)), 0);
    }
}

TEST(InnerFitTest, RejectsBadInput) {
    const auto pr = simulate({.p = 3, .n_envs = 1, .seed = 1}, 50, 1);
    EXPECT_THROW(inner_fit(*pr.stats, {5}, 1.0), InvalidArgument);
    EXPECT_THROW(inner_fit(*pr.stats, {}, 1.0, {.start = Pdag(4)}), DimensionMismatch);
}

TEST(GniesFitTest, SingleEnvironmentKeepsKnownTargets) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto pr = simulate({.p = 5, .n_envs = 1, .seed = seed}, 500, seed);
        const double lambda = bic_lambda(*pr.stats);
        for (Method m : {Method::greedy, Method::rank}) {
            EXPECT_TRUE(gnies_fit(pr.stats, lambda, {.method = m}).targets.empty());
            EXPECT_EQ(gnies_fit(pr.stats, lambda, {.method = m, .known_targets = {2}}).targets,
                      TargetSet{2});
        }
    }
}

TEST(GniesFitTest, RecoversTargetsOnModelMatchData) {
    int exact = 0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto pr = simulate({.p = 6, .n_envs = 3, .seed = seed}, 1000, seed);
        const auto r = gnies_fit(pr.stats, 0.5 * std::log(static_cast<double>(pr.stats->total())));
        exact += r.targets == pr.gen.targets;
        EXPECT_EQ(r.method, Method::greedy);
        EXPECT_EQ(r.icpdag, dag_to_icpdag(pdag_to_dag(r.icpdag), r.targets));
    }
    EXPECT_GE(exact, 4);
}

TEST(GniesFitTest, RankUsesFewerRunsThanGreedy) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto pr = simulate({.p = 6, .n_envs = 3, .seed = seed}, 1000, seed);
        const double lambda = bic_lambda(*pr.stats);
        const auto greedy = gnies_fit(pr.stats, lambda, {.method = Method::greedy});
        const auto rank = gnies_fit(pr.stats, lambda, {.method = Method::rank});
        EXPECT_LE(rank.inner_runs, 2 * (6 + 1));
        EXPECT_LT(rank.inner_runs, greedy.inner_runs);
        EXPECT_EQ(rank.method, Method::rank);
    }
}

TEST(GniesFitTest, RespectsKnownTargetsAndCap) {
    const auto pr = simulate({.p = 6, .n_envs = 5, .seed = 3}, 1000, 3);
    const double lambda = bic_lambda(*pr.stats);
    for (Method m : {Method::greedy, Method::rank}) {
        const auto r = gnies_fit(pr.stats, lambda, {.method = m, .known_targets = {0}, .max_targets = 2});
        EXPECT_TRUE(r.targets.contains(0));
        EXPECT_LE(r.targets.size(), 2);
    }
    EXPECT_THROW(gnies_fit(pr.stats, lambda, {.known_targets = {9}}), InvalidArgument);
}

TEST(GniesFitTest, ThreadCountDoesNotChangeResults) {
    const auto pr = simulate({.p = 7, .n_envs = 4, .seed = 9}, 400, 9);
    const double lambda = bic_lambda(*pr.stats);
    for (Method m : {Method::greedy, Method::rank}) {
        const auto one = gnies_fit(pr.stats, lambda, {.method = m, .threads = 1});
        const auto many = gnies_fit(pr.stats, lambda, {.method = m, .threads = 4});
        const auto uncached = gnies_fit(pr.stats, lambda, {.method = m, .threads = 3, .use_cache = false});
        for (const auto *o : {&many, &uncached}) {
            EXPECT_EQ(one.icpdag, o->icpdag);
            EXPECT_EQ(one.targets, o->targets);
            EXPECT_EQ(one.trace, o->trace);
            EXPECT_EQ(one.outer_trace, o->outer_trace);
            EXPECT_EQ(std::memcmp(&one.score.penalized, &o->score.penalized, sizeof(double)), 0);
        }
    }
}

TEST(GniesFitTest, ThreadsFromEnvironment) {
    ::setenv("GNIES_THREADS", "3", 1);
    EXPECT_EQ(default_threads(), 3);
    ::setenv("GNIES_THREADS", "x", 1);
    EXPECT_EQ(default_threads(), 1);
    ::unsetenv("GNIES_THREADS");
    EXPECT_EQ(default_threads(), 1);
}

TEST(NoiseSpreadTest, SingleEnvironmentIsZero) {
    const auto pr = simulate({.p = 4, .n_envs = 1, .seed = 2}, 100, 2);
    for (double v : noise_variance_spread(pr.gen.model.graph(), *pr.stats)) EXPECT_EQ(v, 0.0);
}

TEST(NoiseSpreadTest, TargetsStandOut) {
    const auto pr = simulate({.p = 6, .n_envs = 4, .seed = 4}, 5000, 4);
    const auto spread = noise_variance_spread(pr.gen.model.graph(), *pr.stats);
    double min_target = 1e300, max_other = 0.0;
    for (int i = 0; i < 6; ++i) {
        if (pr.gen.targets.contains(i)) {
            min_target = std::min(min_target, spread[i]);
        } else {
            max_other = std::max(max_other, spread[i]);
        }
    }
    EXPECT_GT(min_target, max_other);
}

TEST(PoolStatsTest, Examples) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2), b(2, 2);
    b << 2, 1, 1, 3;
    const auto pooled = pool_stats({{a, b}, {100, 300}});
    ASSERT_EQ(pooled.num_envs(), 1);
    EXPECT_EQ(pooled.ns[0], 400);
    EXPECT_TRUE(pooled.sigmas[0].isApprox(0.25 * a + 0.75 * b, 1e-15));
    EXPECT_TRUE(pool_stats({{b, b}, {7, 9}}).sigmas[0].isApprox(b, 1e-15));
}

TEST(PoolStatsTest, GesOnPooledDataMatchesSingleEnvironmentPath) {
    const auto pr = simulate({.p = 5, .n_envs = 3, .seed = 6}, 300, 6);
    const auto pooled = pool_stats(*pr.stats);
    const double lambda = bic_lambda(pooled);
    const auto r = inner_fit(pooled, {}, lambda);
    EXPECT_EQ(r.icpdag, dag_to_cpdag(pdag_to_dag(r.icpdag)));
    EXPECT_EQ(r.score.penalized, full_score(pdag_to_dag(r.icpdag), {}, pooled, lambda).penalized);
}

}  // namespace
}  // namespace gnies
