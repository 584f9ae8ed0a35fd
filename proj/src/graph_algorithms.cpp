#include "gnies/graph_algorithms.hpp"

#include <algorithm>
#include <string>

#include "gnies/errors.hpp"

namespace gnies {

namespace {

void require_same_size(const Dag &d1, const Dag &d2) {
    if (d1.num_nodes() != d2.num_nodes()) {
        throw DimensionMismatch("graphs have " + std::to_string(d1.num_nodes()) + " and " +
                                std::to_string(d2.num_nodes()) + " nodes");
    }
}

void require_targets_in_range(TargetSet targets, int p) {
    if (!targets.is_subset_of(NodeSet::range(p))) {
        throw InvalidArgument("targets " + targets.to_string() + " out of range for p=" +
                              std::to_string(p));
    }
}

bool same_skeleton(const Dag &d1, const Dag &d2) {
    for (int i = 0; i < d1.num_nodes(); ++i) {
        if (d1.adjacents(i) != d2.adjacents(i)) return false;
    }
    return true;
}

template <class G>
std::vector<VStructure> colliders(const G &g) {
    std::vector<VStructure> out;
    for (int k = 0; k < g.num_nodes(); ++k) {
        const NodeSet pa = g.parents(k);
        for (int a : pa) {
            for (int b : pa) {
                if (a < b && !g.adjacent(a, b)) out.push_back({a, k, b});
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Orientation of x - y into x -> y is compelled by one of the Meek rules.
bool meek_compelled(const Pdag &g, int x, int y) {
    const NodeSet adj_y = g.adjacents(y);
    // R1: c -> x - y with c, y non-adjacent.
    if (!(g.parents(x) - adj_y).empty()) return true;
    // R2: x -> c -> y.
    if (g.children(x).intersects(g.parents(y))) return true;
    // R3: x - c -> y and x - d -> y with c, d non-adjacent.
    const NodeSet mid = g.neighbors(x) & g.parents(y);
    for (int c : mid) {
        if (!(mid - g.adjacents(c) - NodeSet::single(c)).empty()) return true;
    }
    // R4: x - c -> d -> y with c, y non-adjacent and x, d adjacent.
    const NodeSet adj_x = g.adjacents(x);
    for (int c : g.neighbors(x) - adj_y - NodeSet::single(y)) {
        if ((g.children(c) & g.parents(y) & adj_x).size() > 0) return true;
    }
    return false;
}

}  // namespace

std::vector<Edge> skeleton(const Dag &d) {
    std::vector<Edge> out;
    for (int i = 0; i < d.num_nodes(); ++i) {
        for (int j : d.adjacents(i)) {
            if (i < j) out.push_back({i, j});
        }
    }
    return out;
}

std::vector<Edge> skeleton(const Pdag &g) {
    std::vector<Edge> out;
    for (int i = 0; i < g.num_nodes(); ++i) {
        for (int j : g.adjacents(i)) {
            if (i < j) out.push_back({i, j});
        }
    }
    return out;
}

std::vector<VStructure> v_structures(const Dag &d) { return colliders(d); }
std::vector<VStructure> v_structures(const Pdag &g) { return colliders(g); }

bool markov_equivalent(const Dag &d1, const Dag &d2) {
    require_same_size(d1, d2);
    return same_skeleton(d1, d2) && v_structures(d1) == v_structures(d2);
}

bool i_equivalent(const Dag &d1, const Dag &d2, TargetSet targets) {
    require_same_size(d1, d2);
    require_targets_in_range(targets, d1.num_nodes());
    for (int i : targets) {
        if (d1.parents(i) != d2.parents(i)) return false;
    }
    return markov_equivalent(d1, d2);
}

Dag augment(const Dag &d, TargetSet targets) {
    const int p = d.num_nodes();
    require_targets_in_range(targets, p);
    if (p + targets.size() > kMaxNodes) throw InvalidArgument("augmented graph too large");
    std::vector<NodeSet> pa(p + targets.size());
    for (int i = 0; i < p; ++i) pa[i] = d.parents(i);
    int source = p;
    for (int t : targets) pa[t].insert(source++);
    return Dag::from_parents(std::move(pa));
}

bool is_conservative(const TargetFamily &family, int p) {
    NodeSet untouched_somewhere;
    for (auto h : family) untouched_somewhere |= NodeSet::range(p) - h;
    return untouched_somewhere == NodeSet::range(p);
}

bool h_equivalent(const Dag &d1, const Dag &d2, const TargetFamily &family) {
    require_same_size(d1, d2);
    const int p = d1.num_nodes();
    for (auto h : family) require_targets_in_range(h, p);
    if (!is_conservative(family, p)) {
        throw PreconditionViolated("target family is not conservative");
    }
    if (!markov_equivalent(d1, d2)) return false;
    auto mutilate = [p](const Dag &d, NodeSet h) {
        std::vector<NodeSet> pa(p);
        for (int i = 0; i < p; ++i) pa[i] = h.contains(i) ? NodeSet{} : d.parents(i);
        return Dag::from_parents(std::move(pa));
    };
    for (auto h : family) {
        if (!same_skeleton(mutilate(d1, h), mutilate(d2, h))) return false;
    }
    return true;
}

bool y_equivalent(const Dag &d1, const Dag &d2, const TargetFamily &family) {
    require_same_size(d1, d2);
    const int p = d1.num_nodes();
    for (auto y : family) require_targets_in_range(y, p);
    if (std::find(family.begin(), family.end(), NodeSet{}) == family.end()) {
        throw PreconditionViolated("target family must contain the empty set");
    }
    std::vector<NodeSet> sources;
    for (auto y : family) {
        if (!y.empty() && std::find(sources.begin(), sources.end(), y) == sources.end()) {
            sources.push_back(y);
        }
    }
    if (p + static_cast<int>(sources.size()) > kMaxNodes) {
        throw InvalidArgument("interventional graph too large");
    }
    auto interventional = [&](const Dag &d) {
        std::vector<NodeSet> pa(p + sources.size());
        for (int i = 0; i < p; ++i) pa[i] = d.parents(i);
        for (std::size_t k = 0; k < sources.size(); ++k) {
            for (int t : sources[k]) pa[t].insert(p + static_cast<int>(k));
        }
        return Dag::from_parents(std::move(pa));
    };
    return markov_equivalent(interventional(d1), interventional(d2));
}

Pdag meek_closure(Pdag g) {
    const int p = g.num_nodes();
    bool changed = true;
    while (changed) {
        changed = false;
        for (int x = 0; x < p; ++x) {
            for (int y : g.neighbors(x)) {
                if (meek_compelled(g, x, y)) {
                    g.orient(x, y);
                    changed = true;
                }
            }
        }
    }
    return g;
}

Dag pdag_to_dag(const Pdag &g) {
    const int p = g.num_nodes();
    std::vector<NodeSet> pa(p);
    NodeSet remaining = NodeSet::range(p);
    while (!remaining.empty()) {
        int sink = -1;
        for (int x = p - 1; x >= 0; --x) {
            if (!remaining.contains(x) || g.children(x).intersects(remaining)) continue;
            const NodeSet nbrs = g.neighbors(x) & remaining;
            const NodeSet adj = g.adjacents(x) & remaining;
            bool eligible = true;
            for (int y : nbrs) {
                if (!(adj - NodeSet::single(y)).is_subset_of(g.adjacents(y))) {
                    eligible = false;
                    break;
                }
            }
            if (eligible) {
                sink = x;
                break;
            }
        }
        if (sink < 0) throw NoConsistentExtension("PDAG admits no consistent extension");
        pa[sink] = g.parents(sink) | (g.neighbors(sink) & remaining);
        remaining.erase(sink);
    }
    return Dag::from_parents(std::move(pa));
}

Pdag dag_to_cpdag(const Dag &d) { return dag_to_icpdag(d, {}); }

Pdag dag_to_icpdag(const Dag &d, TargetSet targets) {
    const int p = d.num_nodes();
    require_targets_in_range(targets, p);
    Pdag g(p);
    for (const auto &e : skeleton(d)) g.add_undirected(e.from, e.to);
    for (const auto &v : v_structures(d)) {
        g.orient(v.a, v.collider);
        g.orient(v.b, v.collider);
    }
    for (int t : targets) {
        for (int u : d.parents(t)) g.orient(u, t);
        for (int c : d.children(t)) g.orient(t, c);
    }
    return meek_closure(std::move(g));
}

Pdag gnies_completion(const Pdag &g, TargetSet targets) {
    const int p = g.num_nodes();
    require_targets_in_range(targets, p);
    for (int t : targets) {
        if (!g.neighbors(t).empty()) {
            throw PreconditionViolated("undirected edge at intervention target " +
                                       std::to_string(t));
        }
    }
    Pdag c = dag_to_cpdag(pdag_to_dag(g));
    for (int t : targets) {
        for (int u : g.parents(t)) c.orient(u, t);
        for (int v : g.children(t)) c.orient(t, v);
    }
    return meek_closure(std::move(c));
}

GraphClass enumerate_class(const Pdag &c, TargetSet targets, const EnumerationOptions &options) {
    require_targets_in_range(targets, c.num_nodes());
    std::vector<Dag> members;
    bool truncated = false;

    // Depth-first orientation of the lowest undirected edge, with Meek
    // propagation after each choice; leaves are filtered by round trip.
    std::function<void(const Pdag &)> expand = [&](const Pdag &g) {
        if (truncated) return;
        const auto undirected = g.undirected_edges();
        if (undirected.empty()) {
            const Dag d = Dag::from_pdag(g);
            if (dag_to_icpdag(d, targets) != c) return;
            if (members.size() >= options.max_members) {
                if (!options.truncate) {
                    throw ClassOverflow("class has more than " +
                                        std::to_string(options.max_members) + " members");
                }
                truncated = true;
                return;
            }
            members.push_back(d);
            return;
        }
        const Edge e = undirected.front();
        for (const Edge dir : {e, Edge{e.to, e.from}}) {
            Pdag h = g;
            h.orient(dir.from, dir.to);
            if (!h.directed_part_acyclic()) continue;
            h = meek_closure(std::move(h));
            if (!h.directed_part_acyclic()) continue;
            expand(h);
        }
    };
    if (c.directed_part_acyclic()) expand(c);
    if (members.empty()) {
        throw InvalidClassRepresentation("graph is not a valid I-CPDAG for targets " +
                                         targets.to_string());
    }
    return GraphClass(std::move(members), truncated);
}

void for_each_dag(int p, const std::function<void(const Dag &)> &visit) {
    if (p < 0 || p > kMaxEnumerationNodes) {
        throw InvalidArgument("exhaustive DAG enumeration supports p <= " +
                              std::to_string(kMaxEnumerationNodes));
    }
    std::vector<Edge> pairs;
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) pairs.push_back({i, j});
    }
    // Each pair is absent, i -> j or j -> i: a base-3 counter over pairs.
    std::vector<int> state(pairs.size(), 0);
    std::vector<NodeSet> pa(p);
    while (true) {
        std::fill(pa.begin(), pa.end(), NodeSet{});
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (state[k] == 1) pa[pairs[k].to].insert(pairs[k].from);
            if (state[k] == 2) pa[pairs[k].from].insert(pairs[k].to);
        }
        if (is_acyclic(pa)) visit(Dag::from_parents(pa));
        std::size_t k = 0;
        while (k < state.size() && state[k] == 2) state[k++] = 0;
        if (k == state.size()) break;
        ++state[k];
    }
}

std::vector<Dag> enumerate_all_dags(int p) {
    std::vector<Dag> out;
    for_each_dag(p, [&](const Dag &d) { out.push_back(d); });
    return out;
}

}  // namespace gnies
