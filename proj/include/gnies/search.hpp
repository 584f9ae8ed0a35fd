#pragma once

#include <compare>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gnies/graph.hpp"
#include "gnies/node_set.hpp"
#include "gnies/score.hpp"

namespace gnies {

/// Add x -> y and orient t -> y for t in T.
struct InsertOp {
    int x = 0;
    int y = 0;
    NodeSet T;
    bool operator==(const InsertOp &) const = default;
};

/// Remove the x,y edge and orient y -> h (and x -> h where x - h) for h in H.
struct DeleteOp {
    int x = 0;
    int y = 0;
    NodeSet H;
    bool operator==(const DeleteOp &) const = default;
};

/// Lexicographic on (x, y, sorted set).
std::strong_ordering operator<=>(const InsertOp &a, const InsertOp &b);
std::strong_ordering operator<=>(const DeleteOp &a, const DeleteOp &b);

/// Undirected neighbours of y that are adjacent to x.
NodeSet na_yx(const Pdag &c, int y, int x);

/// Valid operators in lexicographic order.
std::vector<InsertOp> valid_inserts(const Pdag &c);
std::vector<DeleteOp> valid_deletes(const Pdag &c);

bool is_valid_insert(const Pdag &c, const InsertOp &op);
bool is_valid_delete(const Pdag &c, const DeleteOp &op);

/// The operator applied to c, not yet completed. Throws InvalidArgument
/// if the operator is not valid for c.
Pdag apply_insert(const Pdag &c, const InsertOp &op);
Pdag apply_delete(const Pdag &c, const DeleteOp &op);

/// Parent sets of y before and after the operator.
struct ParentChange {
    NodeSet before;
    NodeSet after;
};
ParentChange insert_parents(const Pdag &c, const InsertOp &op);
ParentChange delete_parents(const Pdag &c, const DeleteOp &op);

/// Change in penalised score; only y's local term moves.
double insert_score_delta(const InsertOp &op, const Pdag &c, TargetSet targets,
                          const Scorer &scorer);
double delete_score_delta(const DeleteOp &op, const Pdag &c, TargetSet targets,
                          const Scorer &scorer);

/// Turn the edge between x and y (currently y -> x or x - y) into x -> y
/// and orient t -> y for t in C.
struct TurnOp {
    int x = 0;
    int y = 0;
    NodeSet C;
    bool operator==(const TurnOp &) const = default;
};
std::strong_ordering operator<=>(const TurnOp &a, const TurnOp &b);

/// The turned PDAG, not yet completed, or nullopt if it has no consistent
/// extension. Throws InvalidArgument if op does not name a turnable edge.
std::optional<Pdag> apply_turn(const Pdag &c, const TurnOp &op);
/// Turns with C a subset of the other undirected neighbours of y whose
/// result is extendable, in lexicographic order.
std::vector<TurnOp> valid_turns(const Pdag &c);
/// Score of the turned class minus the score of c. Unlike inserts and
/// deletes this may involve several nodes, so it is taken from the two
/// consistent extensions.
double turn_score_delta(const TurnOp &op, const Pdag &c, TargetSet targets, const Scorer &scorer);

enum class StepKind { insert, remove, turn, add_target, remove_target };
std::string to_string(StepKind kind);

struct TraceStep {
    StepKind kind = StepKind::insert;
    /// Edge operators: x, y and T or H. Target steps: x is the node, y = -1.
    int x = -1;
    int y = -1;
    NodeSet set;
    double delta = 0.0;
    /// Penalised score after the step.
    double score = 0.0;
    bool operator==(const TraceStep &) const = default;
};

enum class Method { inner, greedy, rank };
std::string to_string(Method method);

struct SearchResult {
    Pdag icpdag;
    TargetSet targets;
    ScoreValue score;
    double lambda = 0.0;
    Method method = Method::inner;
    /// Edge operators of the inner run that produced icpdag.
    std::vector<TraceStep> trace;
    /// Target additions and removals of the outer search.
    std::vector<TraceStep> outer_trace;
    /// Distinct inner runs performed.
    int inner_runs = 0;
};

struct InnerOptions {
    /// Start here instead of the empty graph; must be an I-CPDAG for the targets.
    std::optional<Pdag> start;
    /// Relative acceptance threshold: delta > tol * max(1, |score|).
    double tol = 1e-9;
    /// Run an edge-reversal phase after the backward phase.
    bool turning = true;
};

/// Greedy forward (insert) then backward (delete) search over I-CPDAGs,
/// completing with gnies_completion after every step, optionally followed
/// by a reversal phase. The phases are repeated until none of them moves.
/// Throws SolverError past 10 p^2 steps.
SearchResult inner_fit(const Scorer &scorer, TargetSet targets, const InnerOptions &options = {});
SearchResult inner_fit(const SufficientStats &stats, TargetSet targets, double lambda,
                       const InnerOptions &options = {});

struct OuterOptions {
    Method method = Method::greedy;
    TargetSet known_targets;
    /// At most this many targets; -1 means p.
    int max_targets = -1;
    /// Rank method: add the most variable noise estimate first.
    bool rank_descending = true;
    /// Worker threads for outer candidates; 0 reads GNIES_THREADS, else 1.
    int threads = 0;
    bool use_cache = true;
    /// Cache to use instead of a fresh one; it must have been filled from
    /// the same statistics. Entries do not depend on lambda.
    std::shared_ptr<ScoreCache> cache;
    double tol = 1e-9;
    bool turning = true;
};

/// Outer search over intervention targets (greedy or ranking).
SearchResult gnies_fit(std::shared_ptr<const SufficientStats> stats, double lambda,
                       const OuterOptions &options = {});
SearchResult gnies_fit(const SufficientStats &stats, double lambda, const OuterOptions &options = {});

/// Population variance across environments of each node's per-environment
/// noise variance estimate under `d` with every node intervened.
std::vector<double> noise_variance_spread(const Dag &d, const SufficientStats &stats,
                                          const MleOptions &options = {});

/// Single environment with the n-weighted average covariance.
SufficientStats pool_stats(const SufficientStats &stats);

/// Worker count from GNIES_THREADS (>= 1); 1 if unset or malformed.
int default_threads();

}  // namespace gnies
