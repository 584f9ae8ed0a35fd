#include "gnies/graph.hpp"

#include <algorithm>
#include <sstream>
#include <string>

#include "gnies/errors.hpp"

namespace gnies {

namespace {

void check_node_count(int p) {
    if (p < 0 || p > kMaxNodes) {
        throw InvalidArgument("node count " + std::to_string(p) + " outside [0, " +
                              std::to_string(kMaxNodes) + "]");
    }
}

void check_pair(int p, int i, int j) {
    if (i < 0 || j < 0 || i >= p || j >= p) {
        throw InvalidArgument("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") out of range for p=" + std::to_string(p));
    }
    if (i == j) throw InvalidArgument("self loop on node " + std::to_string(i));
}

}  // namespace

std::string NodeSet::to_string() const {
    std::ostringstream out;
    out << '{';
    bool first = true;
    for (int v : *this) {
        if (!first) out << ',';
        out << v;
        first = false;
    }
    out << '}';
    return out.str();
}

bool is_acyclic(const std::vector<NodeSet> &parents) {
    // Repeatedly peel off nodes whose remaining parents are all removed.
    const int p = static_cast<int>(parents.size());
    NodeSet remaining = NodeSet::range(p);
    while (!remaining.empty()) {
        bool progressed = false;
        for (int v : remaining) {
            if (!parents[v].intersects(remaining)) {
                remaining.erase(v);
                progressed = true;
            }
        }
        if (!progressed) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Dag

Dag::Dag(int p) {
    check_node_count(p);
    pa_.assign(p, {});
    ch_.assign(p, {});
}

Dag::Dag(int p, const std::vector<Edge> &edges) : Dag(p) {
    for (const auto &[i, j] : edges) {
        check_pair(p, i, j);
        if (ch_[j].contains(i)) {
            throw InvalidArgument("both " + std::to_string(i) + "->" + std::to_string(j) +
                                  " and the reverse edge given");
        }
        pa_[j].insert(i);
        ch_[i].insert(j);
    }
    if (!is_acyclic(pa_)) throw InvalidArgument("edge list contains a directed cycle");
}

Dag Dag::from_parents(std::vector<NodeSet> parents) {
    const int p = static_cast<int>(parents.size());
    Dag d(p);
    const NodeSet all = NodeSet::range(p);
    for (int i = 0; i < p; ++i) {
        if (!parents[i].is_subset_of(all) || parents[i].contains(i)) {
            throw InvalidArgument("invalid parent set for node " + std::to_string(i));
        }
        for (int j : parents[i]) d.ch_[j].insert(i);
    }
    d.pa_ = std::move(parents);
    if (!is_acyclic(d.pa_)) throw InvalidArgument("parent sets contain a directed cycle");
    return d;
}

Dag Dag::from_pdag(const Pdag &g) {
    if (!g.fully_directed()) throw InvalidArgument("graph has undirected edges");
    std::vector<NodeSet> pa(g.num_nodes());
    for (int i = 0; i < g.num_nodes(); ++i) pa[i] = g.parents(i);
    return from_parents(std::move(pa));
}

int Dag::num_edges() const {
    int m = 0;
    for (auto s : pa_) m += s.size();
    return m;
}

std::vector<Edge> Dag::edges() const {
    std::vector<Edge> out;
    for (int i = 0; i < num_nodes(); ++i) {
        for (int j : ch_[i]) out.push_back({i, j});
    }
    return out;
}

std::vector<int> Dag::topological_order() const {
    const int p = num_nodes();
    std::vector<int> order;
    order.reserve(p);
    NodeSet placed;
    while (static_cast<int>(order.size()) < p) {
        for (int v = 0; v < p; ++v) {
            if (!placed.contains(v) && pa_[v].is_subset_of(placed)) {
                order.push_back(v);
                placed.insert(v);
                break;
            }
        }
    }
    return order;
}

Pdag Dag::to_pdag() const {
    Pdag g(num_nodes());
    for (const auto &e : edges()) g.add_directed(e.from, e.to);
    return g;
}

std::strong_ordering Dag::operator<=>(const Dag &o) const {
    if (auto c = pa_.size() <=> o.pa_.size(); c != 0) return c;
    for (std::size_t i = 0; i < pa_.size(); ++i) {
        if (auto c = pa_[i].bits() <=> o.pa_[i].bits(); c != 0) return c;
    }
    return std::strong_ordering::equal;
}

std::size_t Dag::hash() const {
    std::size_t h = pa_.size();
    for (auto s : pa_) h = h * 0x9e3779b97f4a7c15ULL + std::hash<std::uint64_t>{}(s.bits());
    return h;
}

// ---------------------------------------------------------------------------
// Pdag

Pdag::Pdag(int p) {
    check_node_count(p);
    pa_.assign(p, {});
    ch_.assign(p, {});
    ne_.assign(p, {});
}

Pdag::Pdag(int p, const std::vector<Edge> &directed, const std::vector<Edge> &undirected)
    : Pdag(p) {
    auto check_free = [&](int i, int j) {
        check_pair(p, i, j);
        if (adjacent(i, j)) {
            throw InvalidArgument("more than one edge between " + std::to_string(i) + " and " +
                                  std::to_string(j));
        }
    };
    for (const auto &[i, j] : directed) {
        check_free(i, j);
        add_directed(i, j);
    }
    for (const auto &[i, j] : undirected) {
        check_free(i, j);
        add_undirected(i, j);
    }
    if (!directed_part_acyclic()) throw InvalidArgument("directed edges contain a cycle");
}

bool Pdag::is_clique(NodeSet nodes) const {
    for (int v : nodes) {
        if (!(nodes - NodeSet::single(v)).is_subset_of(adjacents(v))) return false;
    }
    return true;
}

int Pdag::num_edges() const {
    int directed = 0;
    for (auto s : pa_) directed += s.size();
    return directed + num_undirected();
}

int Pdag::num_undirected() const {
    int twice = 0;
    for (auto s : ne_) twice += s.size();
    return twice / 2;
}

std::vector<Edge> Pdag::directed_edges() const {
    std::vector<Edge> out;
    for (int i = 0; i < num_nodes(); ++i) {
        for (int j : ch_[i]) out.push_back({i, j});
    }
    return out;
}

std::vector<Edge> Pdag::undirected_edges() const {
    std::vector<Edge> out;
    for (int i = 0; i < num_nodes(); ++i) {
        for (int j : ne_[i]) {
            if (i < j) out.push_back({i, j});
        }
    }
    return out;
}

bool Pdag::directed_part_acyclic() const { return is_acyclic(pa_); }

void Pdag::add_directed(int from, int to) {
    ch_[from].insert(to);
    pa_[to].insert(from);
}

void Pdag::add_undirected(int i, int j) {
    ne_[i].insert(j);
    ne_[j].insert(i);
}

void Pdag::remove_edge(int i, int j) {
    ch_[i].erase(j);
    ch_[j].erase(i);
    pa_[i].erase(j);
    pa_[j].erase(i);
    ne_[i].erase(j);
    ne_[j].erase(i);
}

void Pdag::orient(int from, int to) {
    remove_edge(from, to);
    add_directed(from, to);
}

// ---------------------------------------------------------------------------
// GraphClass

GraphClass::GraphClass(std::vector<Dag> members, bool truncated)
    : members_(std::move(members)), truncated_(truncated) {
    if (members_.empty()) throw InvalidArgument("graph class must be non-empty");
    const int p = members_.front().num_nodes();
    for (const auto &d : members_) {
        if (d.num_nodes() != p) throw DimensionMismatch("graph class members differ in size");
    }
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

bool GraphClass::contains(const Dag &d) const {
    return std::binary_search(members_.begin(), members_.end(), d);
}

}  // namespace gnies
