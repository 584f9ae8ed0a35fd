#include "gnies/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <numeric>
#include <thread>

#include "gnies/errors.hpp"
#include "gnies/graph_algorithms.hpp"

namespace gnies {

std::strong_ordering operator<=>(const InsertOp &a, const InsertOp &b) {
    if (auto c = a.x <=> b.x; c != 0) return c;
    if (auto c = a.y <=> b.y; c != 0) return c;
    return lex_compare(a.T, b.T);
}

std::strong_ordering operator<=>(const DeleteOp &a, const DeleteOp &b) {
    if (auto c = a.x <=> b.x; c != 0) return c;
    if (auto c = a.y <=> b.y; c != 0) return c;
    return lex_compare(a.H, b.H);
}

NodeSet na_yx(const Pdag &c, int y, int x) { return c.neighbors(y) & c.adjacents(x); }

namespace {

// True if some semi-directed path y ~> x avoids `blocked`.
bool semi_directed_path_avoiding(const Pdag &c, int y, int x, NodeSet blocked) {
    NodeSet seen = NodeSet::single(y);
    std::vector<int> stack{y};
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : c.children(v) | c.neighbors(v)) {
            if (w == x) return true;
            if (seen.contains(w) || blocked.contains(w)) continue;
            seen.insert(w);
            stack.push_back(w);
        }
    }
    return false;
}

bool insert_shape_ok(const Pdag &c, const InsertOp &op) {
    const int p = c.num_nodes();
    if (op.x < 0 || op.y < 0 || op.x >= p || op.y >= p || op.x == op.y) return false;
    if (c.adjacent(op.x, op.y)) return false;
    return op.T.is_subset_of(c.neighbors(op.y) - c.adjacents(op.x));
}

bool insert_conditions(const Pdag &c, const InsertOp &op) {
    const NodeSet cond = na_yx(c, op.y, op.x) | op.T;
    return c.is_clique(cond) && !semi_directed_path_avoiding(c, op.y, op.x, cond);
}

bool delete_shape_ok(const Pdag &c, const DeleteOp &op) {
    const int p = c.num_nodes();
    if (op.x < 0 || op.y < 0 || op.x >= p || op.y >= p || op.x == op.y) return false;
    if (!c.has_directed(op.x, op.y) && !c.has_undirected(op.x, op.y)) return false;
    return op.H.is_subset_of(na_yx(c, op.y, op.x));
}

}  // namespace

bool is_valid_insert(const Pdag &c, const InsertOp &op) {
    return insert_shape_ok(c, op) && insert_conditions(c, op);
}

bool is_valid_delete(const Pdag &c, const DeleteOp &op) {
    return delete_shape_ok(c, op) && c.is_clique(na_yx(c, op.y, op.x) - op.H);
}

std::vector<InsertOp> valid_inserts(const Pdag &c) {
    const int p = c.num_nodes();
    std::vector<InsertOp> out;
    for (int x = 0; x < p; ++x) {
        for (int y = 0; y < p; ++y) {
            if (x == y || c.adjacent(x, y)) continue;
            const NodeSet na = na_yx(c, y, x);
            if (!c.is_clique(na)) continue;
            const std::size_t first = out.size();
            for_each_subset(c.neighbors(y) - c.adjacents(x), [&](NodeSet t) {
                const InsertOp op{x, y, t};
                if (insert_conditions(c, op)) out.push_back(op);
            });
            std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
        }
    }
    return out;
}

std::vector<DeleteOp> valid_deletes(const Pdag &c) {
    const int p = c.num_nodes();
    std::vector<DeleteOp> out;
    for (int x = 0; x < p; ++x) {
        for (int y = 0; y < p; ++y) {
            if (x == y || !(c.has_directed(x, y) || c.has_undirected(x, y))) continue;
            const NodeSet na = na_yx(c, y, x);
            const std::size_t first = out.size();
            for_each_subset(na, [&](NodeSet h) {
                if (c.is_clique(na - h)) out.push_back({x, y, h});
            });
            std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
        }
    }
    return out;
}

Pdag apply_insert(const Pdag &c, const InsertOp &op) {
    if (!is_valid_insert(c, op)) throw InvalidArgument("invalid insert operator");
    Pdag g = c;
    g.add_directed(op.x, op.y);
    for (int t : op.T) g.orient(t, op.y);
    return g;
}

Pdag apply_delete(const Pdag &c, const DeleteOp &op) {
    if (!is_valid_delete(c, op)) throw InvalidArgument("invalid delete operator");
    Pdag g = c;
    g.remove_edge(op.x, op.y);
    for (int h : op.H) {
        g.orient(op.y, h);
        if (g.has_undirected(op.x, h)) g.orient(op.x, h);
    }
    return g;
}

ParentChange insert_parents(const Pdag &c, const InsertOp &op) {
    const NodeSet before = c.parents(op.y) | na_yx(c, op.y, op.x) | op.T;
    return {before, before | NodeSet::single(op.x)};
}

ParentChange delete_parents(const Pdag &c, const DeleteOp &op) {
    const NodeSet kept = c.parents(op.y) | (na_yx(c, op.y, op.x) - op.H);
    return {kept | NodeSet::single(op.x), kept - NodeSet::single(op.x)};
}

namespace {

double parent_change_delta(const ParentChange &pc, int y, TargetSet targets, const Scorer &scorer) {
    const bool intervened = targets.contains(y);
    return scorer.local(y, pc.after, intervened).penalized -
           scorer.local(y, pc.before, intervened).penalized;
}

}  // namespace

double insert_score_delta(const InsertOp &op, const Pdag &c, TargetSet targets,
                          const Scorer &scorer) {
    return parent_change_delta(insert_parents(c, op), op.y, targets, scorer);
}

double delete_score_delta(const DeleteOp &op, const Pdag &c, TargetSet targets,
                          const Scorer &scorer) {
    return parent_change_delta(delete_parents(c, op), op.y, targets, scorer);
}

std::strong_ordering operator<=>(const TurnOp &a, const TurnOp &b) {
    if (auto c = a.x <=> b.x; c != 0) return c;
    if (auto c = a.y <=> b.y; c != 0) return c;
    return lex_compare(a.C, b.C);
}

namespace {

bool turnable(const Pdag &c, int x, int y) {
    return c.has_directed(y, x) || c.has_undirected(x, y);
}

std::optional<Pdag> turned(const Pdag &c, const TurnOp &op) {
    Pdag g = c;
    g.remove_edge(op.x, op.y);
    g.add_directed(op.x, op.y);
    for (int t : op.C) g.orient(t, op.y);
    try {
        pdag_to_dag(g);
    } catch (const NoConsistentExtension &) {
        return std::nullopt;
    }
    return g;
}

}  // namespace

std::optional<Pdag> apply_turn(const Pdag &c, const TurnOp &op) {
    const int p = c.num_nodes();
    if (op.x < 0 || op.y < 0 || op.x >= p || op.y >= p || op.x == op.y || !turnable(c, op.x, op.y) ||
        !op.C.is_subset_of(c.neighbors(op.y) - NodeSet::single(op.x))) {
        throw InvalidArgument("invalid turn operator");
    }
    return turned(c, op);
}

std::vector<TurnOp> valid_turns(const Pdag &c) {
    const int p = c.num_nodes();
    std::vector<TurnOp> out;
    for (int x = 0; x < p; ++x) {
        for (int y = 0; y < p; ++y) {
            if (x == y || !turnable(c, x, y)) continue;
            const std::size_t first = out.size();
            for_each_subset(c.neighbors(y) - NodeSet::single(x), [&](NodeSet cs) {
                const TurnOp op{x, y, cs};
                if (turned(c, op)) out.push_back(op);
            });
            std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
        }
    }
    return out;
}

double turn_score_delta(const TurnOp &op, const Pdag &c, TargetSet targets, const Scorer &scorer) {
    const auto g = apply_turn(c, op);
    if (!g) throw InvalidArgument("turn operator has no consistent extension");
    return scorer.full(pdag_to_dag(*g), targets).penalized -
           scorer.full(pdag_to_dag(c), targets).penalized;
}

std::string to_string(StepKind kind) {
    switch (kind) {
        case StepKind::insert: return "insert";
        case StepKind::remove: return "delete";
        case StepKind::turn: return "turn";
        case StepKind::add_target: return "add_target";
        case StepKind::remove_target: return "remove_target";
    }
    return "?";
}

std::string to_string(Method method) {
    switch (method) {
        case Method::inner: return "inner";
        case Method::greedy: return "greedy";
        case Method::rank: return "rank";
    }
    return "?";
}

namespace {

bool improves(double delta, double score, double tol) {
    return delta > tol * std::max(1.0, std::abs(score));
}

struct InnerState {
    const Scorer &scorer;
    TargetSet targets;
    double tol;
    Pdag c;
    ScoreValue score;
    std::vector<TraceStep> trace;
    int steps = 0;
    int cap = 0;

    void rescore() { score = scorer.full(pdag_to_dag(c), targets); }

    void record(StepKind kind, int x, int y, NodeSet set, double delta) {
        if (++steps > cap) {
            throw SolverError("inner search exceeded " + std::to_string(cap) + " steps");
        }
        rescore();
        trace.push_back({kind, x, y, set, delta, score.penalized});
    }

    // Best operator by delta; the first of equal deltas wins, and the lists
    // are already in lexicographic order.
    template <class Op, class DeltaFn>
    std::optional<std::pair<Op, double>> best(const std::vector<Op> &ops, DeltaFn delta_of) const {
        std::optional<std::pair<Op, double>> top;
        for (const auto &op : ops) {
            const double d = delta_of(op);
            if (!top || d > top->second) top = {op, d};
        }
        if (top && !improves(top->second, score.penalized, tol)) return std::nullopt;
        return top;
    }

    int forward() {
        int moves = 0;
        while (true) {
            auto top = best(valid_inserts(c), [&](const InsertOp &op) {
                return insert_score_delta(op, c, targets, scorer);
            });
            if (!top) return moves;
            const auto &[op, delta] = *top;
            c = gnies_completion(apply_insert(c, op), targets);
            record(StepKind::insert, op.x, op.y, op.T, delta);
            ++moves;
        }
    }

    int backward() {
        int moves = 0;
        while (true) {
            auto top = best(valid_deletes(c), [&](const DeleteOp &op) {
                return delete_score_delta(op, c, targets, scorer);
            });
            if (!top) return moves;
            const auto &[op, delta] = *top;
            c = gnies_completion(apply_delete(c, op), targets);
            record(StepKind::remove, op.x, op.y, op.H, delta);
            ++moves;
        }
    }

    int turning() {
        int moves = 0;
        while (true) {
            const double current = score.penalized;
            auto top = best(valid_turns(c), [&](const TurnOp &op) {
                return scorer.full(pdag_to_dag(*turned(c, op)), targets).penalized - current;
            });
            if (!top) return moves;
            const auto &[op, delta] = *top;
            c = gnies_completion(*turned(c, op), targets);
            record(StepKind::turn, op.x, op.y, op.C, delta);
            ++moves;
        }
    }
};

void require_targets(TargetSet targets, int p) {
    if (!targets.is_subset_of(NodeSet::range(p))) {
        throw InvalidArgument("intervention target out of range: " + targets.to_string());
    }
}

}  // namespace

SearchResult inner_fit(const Scorer &scorer, TargetSet targets, const InnerOptions &options) {
    const int p = scorer.stats().num_nodes();
    require_targets(targets, p);
    InnerState st{scorer, targets, options.tol, options.start.value_or(Pdag(p)), {}, {}, 0,
                  std::max(10 * p * p, 10)};
    if (st.c.num_nodes() != p) throw DimensionMismatch("start graph has the wrong number of nodes");
    st.rescore();
    while (true) {
        int moves = st.forward();
        moves += st.backward();
        if (options.turning) moves += st.turning();
        if (moves == 0) break;
    }
    SearchResult r;
    r.icpdag = std::move(st.c);
    r.targets = targets;
    r.score = st.score;
    r.lambda = scorer.lambda();
    r.method = Method::inner;
    r.trace = std::move(st.trace);
    r.inner_runs = 1;
    return r;
}

SearchResult inner_fit(const SufficientStats &stats, TargetSet targets, double lambda,
                       const InnerOptions &options) {
    stats.validate();
    const Scorer scorer(std::make_shared<const SufficientStats>(stats), lambda);
    return inner_fit(scorer, targets, options);
}

int default_threads() {
    const char *env = std::getenv("GNIES_THREADS");
    if (env == nullptr) return 1;
    char *end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) return 1;
    return static_cast<int>(std::min<long>(n, 256));
}

std::vector<double> noise_variance_spread(const Dag &d, const SufficientStats &stats,
                                          const MleOptions &options) {
    const int p = d.num_nodes();
    if (p != stats.num_nodes()) throw DimensionMismatch("graph and statistics differ in size");
    std::vector<double> out(p, 0.0);
    for (int i = 0; i < p; ++i) {
        const auto w = local_mle({i, d.parents(i), true}, stats, options).omegas;
        if (w.size() < 2) continue;
        const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
        double ss = 0.0;
        for (double v : w) ss += (v - mean) * (v - mean);
        out[i] = ss / static_cast<double>(w.size());
    }
    return out;
}

namespace {

// Memoised inner runs keyed by target set; candidates are evaluated on a
// small worker pool and read back in a fixed order.
class OuterSearch {
public:
    OuterSearch(const Scorer &scorer, const OuterOptions &options, int threads)
        : scorer_(scorer), options_(options), threads_(threads) {}

    const SearchResult &run(TargetSet t) {
        evaluate({t});
        return memo_.at(t.bits());
    }

    void evaluate(const std::vector<TargetSet> &candidates) {
        std::vector<TargetSet> todo;
        for (auto t : candidates) {
            if (!memo_.contains(t.bits()) &&
                std::find(todo.begin(), todo.end(), t) == todo.end()) {
                todo.push_back(t);
            }
        }
        std::vector<std::optional<SearchResult>> results(todo.size());
        std::vector<std::exception_ptr> errors(todo.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t k = next++; k < todo.size(); k = next++) {
                try {
                    results[k] = inner_fit(scorer_, todo[k], {.start = std::nullopt, .tol = options_.tol, .turning = options_.turning});
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            }
        };
        const int n = std::min<int>(threads_, static_cast<int>(todo.size()));
        if (n <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < n; ++w) pool.emplace_back(worker);
            for (auto &th : pool) th.join();
        }
        for (std::size_t k = 0; k < todo.size(); ++k) {
            if (errors[k]) std::rethrow_exception(errors[k]);
            memo_.emplace(todo[k].bits(), std::move(*results[k]));
        }
    }

    double score(TargetSet t) { return run(t).score.penalized; }
    int runs() const { return static_cast<int>(memo_.size()); }
    bool improves_on(double candidate, double current) const {
        return improves(candidate - current, current, options_.tol);
    }

private:
    const Scorer &scorer_;
    const OuterOptions &options_;
    int threads_;
    std::map<std::uint64_t, SearchResult> memo_;
};

TargetSet greedy_targets(OuterSearch &search, TargetSet known, int p, int cap,
                         std::vector<TraceStep> &trace) {
    TargetSet current = known;
    double cur = search.score(current);
    auto step = [&](bool adding) {
        std::vector<TargetSet> candidates;
        std::vector<int> nodes;
        for (int j = 0; j < p; ++j) {
            if (adding && (current.contains(j) || current.size() >= cap)) continue;
            if (!adding && (!current.contains(j) || known.contains(j))) continue;
            TargetSet t = current;
            adding ? t.insert(j) : t.erase(j);
            candidates.push_back(t);
            nodes.push_back(j);
        }
        search.evaluate(candidates);
        int best = -1;
        double best_score = 0.0;
        for (std::size_t k = 0; k < candidates.size(); ++k) {
            const double s = search.score(candidates[k]);
            if (best < 0 || s > best_score) {
                best = static_cast<int>(k);
                best_score = s;
            }
        }
        if (best < 0 || !search.improves_on(best_score, cur)) return false;
        trace.push_back({adding ? StepKind::add_target : StepKind::remove_target, nodes[best], -1, {},
                         best_score - cur, best_score});
        current = candidates[best];
        cur = best_score;
        return true;
    };
    while (step(true)) {
    }
    while (step(false)) {
    }
    return current;
}

TargetSet ranked_targets(OuterSearch &search, const Scorer &scorer, TargetSet known, int p, int cap,
                         bool descending, std::vector<TraceStep> &trace) {
    const SearchResult &all = search.run(NodeSet::range(p));
    const auto spread =
        noise_variance_spread(pdag_to_dag(all.icpdag), scorer.stats(), scorer.options());
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return descending ? spread[a] > spread[b] : spread[a] < spread[b];
    });

    TargetSet current = known;
    double cur = search.score(current);
    std::vector<int> added;
    for (int j : order) {
        if (known.contains(j)) continue;
        if (current.size() >= cap) break;
        const TargetSet t = current | NodeSet::single(j);
        const double s = search.score(t);
        if (!search.improves_on(s, cur)) break;
        trace.push_back({StepKind::add_target, j, -1, {}, s - cur, s});
        current = t;
        cur = s;
        added.push_back(j);
    }
    for (auto it = added.rbegin(); it != added.rend(); ++it) {
        const TargetSet t = current - NodeSet::single(*it);
        const double s = search.score(t);
        if (!search.improves_on(s, cur)) break;
        trace.push_back({StepKind::remove_target, *it, -1, {}, s - cur, s});
        current = t;
        cur = s;
    }
    return current;
}

}  // namespace

SearchResult gnies_fit(std::shared_ptr<const SufficientStats> stats, double lambda,
                       const OuterOptions &options) {
    if (!stats) throw InvalidArgument("missing statistics");
    stats->validate();
    const int p = stats->num_nodes();
    require_targets(options.known_targets, p);
    if (options.method == Method::inner) throw InvalidArgument("outer method must be greedy or rank");
    const int cap = std::max(options.max_targets < 0 ? p : std::min(options.max_targets, p),
                             options.known_targets.size());
    const int threads = options.threads > 0 ? options.threads : default_threads();

    std::shared_ptr<ScoreCache> cache;
    if (options.use_cache) cache = options.cache ? options.cache : std::make_shared<ScoreCache>();
    const Scorer scorer(stats, lambda, cache);
    OuterSearch search(scorer, options, threads);
    std::vector<TraceStep> outer;
    // With one environment every target set gives the same score function,
    // so only the search path of the inner runs could tell them apart.
    const TargetSet chosen =
        stats->num_envs() == 1 ? options.known_targets
        : options.method == Method::greedy
            ? greedy_targets(search, options.known_targets, p, cap, outer)
            : ranked_targets(search, scorer, options.known_targets, p, cap,
                             options.rank_descending, outer);

    SearchResult r = inner_fit(scorer, chosen, {.start = std::nullopt, .tol = options.tol, .turning = options.turning});
    r.method = options.method;
    r.outer_trace = std::move(outer);
    r.inner_runs = search.runs();
    return r;
}

SearchResult gnies_fit(const SufficientStats &stats, double lambda, const OuterOptions &options) {
    return gnies_fit(std::make_shared<const SufficientStats>(stats), lambda, options);
}

SufficientStats pool_stats(const SufficientStats &stats) {
    stats.validate();
    return {{stats.pooled()}, {stats.total()}};
}

}  // namespace gnies
