#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <vector>

#include "gnies/node_set.hpp"

namespace gnies {

/// An edge between two nodes. For directed edges `from -> to`; for
/// undirected edges the pair is normalised so that from < to.
struct Edge {
    int from = 0;
    int to = 0;
    auto operator<=>(const Edge &) const = default;
};

class Pdag;

/// Directed acyclic graph on nodes 0..p-1, stored as parent/child bit rows.
class Dag {
public:
    Dag() = default;
    explicit Dag(int p);
    /// Throws InvalidArgument on out-of-range nodes, self loops, 2-cycles
    /// or any directed cycle.
    Dag(int p, const std::vector<Edge> &edges);
    /// parents[i] is the parent set of node i.
    static Dag from_parents(std::vector<NodeSet> parents);
    /// Throws InvalidArgument if `g` has undirected edges or a cycle.
    static Dag from_pdag(const Pdag &g);

    int num_nodes() const { return static_cast<int>(pa_.size()); }
    NodeSet parents(int i) const { return pa_[i]; }
    NodeSet children(int i) const { return ch_[i]; }
    NodeSet adjacents(int i) const { return pa_[i] | ch_[i]; }
    bool has_edge(int from, int to) const { return ch_[from].contains(to); }
    bool adjacent(int i, int j) const { return adjacents(i).contains(j); }
    int num_edges() const;
    /// Sorted list of directed edges.
    std::vector<Edge> edges() const;
    std::vector<int> topological_order() const;
    Pdag to_pdag() const;

    bool operator==(const Dag &o) const { return pa_ == o.pa_; }
    std::strong_ordering operator<=>(const Dag &o) const;
    std::size_t hash() const;

private:
    std::vector<NodeSet> pa_;
    std::vector<NodeSet> ch_;
};

/// Partially directed graph: a mix of directed and undirected edges with
/// at most one edge per node pair and an acyclic directed part.
class Pdag {
public:
    Pdag() = default;
    explicit Pdag(int p);
    /// Validates ranges, self loops, duplicate adjacencies and directed
    /// acyclicity; throws InvalidArgument otherwise.
    Pdag(int p, const std::vector<Edge> &directed, const std::vector<Edge> &undirected);

    int num_nodes() const { return static_cast<int>(pa_.size()); }
    NodeSet parents(int i) const { return pa_[i]; }
    NodeSet children(int i) const { return ch_[i]; }
    /// Nodes joined to i by an undirected edge.
    NodeSet neighbors(int i) const { return ne_[i]; }
    NodeSet adjacents(int i) const { return pa_[i] | ch_[i] | ne_[i]; }
    bool has_directed(int from, int to) const { return ch_[from].contains(to); }
    bool has_undirected(int i, int j) const { return ne_[i].contains(j); }
    bool adjacent(int i, int j) const { return adjacents(i).contains(j); }
    bool is_clique(NodeSet nodes) const;

    int num_edges() const;
    int num_undirected() const;
    std::vector<Edge> directed_edges() const;
    std::vector<Edge> undirected_edges() const;
    bool fully_directed() const { return num_undirected() == 0; }
    bool directed_part_acyclic() const;

    // Unchecked mutators. Callers keep the one-edge-per-pair invariant.
    void add_directed(int from, int to);
    void add_undirected(int i, int j);
    void remove_edge(int i, int j);
    /// Replaces whatever joins the pair by from -> to.
    void orient(int from, int to);

    bool operator==(const Pdag &o) const = default;

private:
    std::vector<NodeSet> pa_;
    std::vector<NodeSet> ch_;
    std::vector<NodeSet> ne_;
};

/// A non-empty set of DAGs over the same nodes, kept sorted and unique.
class GraphClass {
public:
    explicit GraphClass(std::vector<Dag> members, bool truncated = false);

    const std::vector<Dag> &members() const { return members_; }
    std::size_t size() const { return members_.size(); }
    int num_nodes() const { return members_.front().num_nodes(); }
    bool contains(const Dag &d) const;
    /// True when enumeration stopped at its member cap.
    bool truncated() const { return truncated_; }

    bool operator==(const GraphClass &o) const { return members_ == o.members_; }

private:
    std::vector<Dag> members_;
    bool truncated_ = false;
};

/// Acyclicity of the digraph given by parent rows.
bool is_acyclic(const std::vector<NodeSet> &parents);

}  // namespace gnies

template <>
struct std::hash<gnies::Dag> {
    std::size_t operator()(const gnies::Dag &d) const noexcept { return d.hash(); }
};
