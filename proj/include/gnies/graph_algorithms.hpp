#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "gnies/graph.hpp"
#include "gnies/node_set.hpp"

namespace gnies {

/// Unshielded collider a -> collider <- b with a < b and a, b non-adjacent.
struct VStructure {
    int a = 0;
    int collider = 0;
    int b = 0;
    auto operator<=>(const VStructure &) const = default;
};

/// A family of intervention target sets, one per environment.
using TargetFamily = std::vector<NodeSet>;

// --- structural queries -----------------------------------------------------

/// Undirected adjacencies as sorted pairs (i < j).
std::vector<Edge> skeleton(const Dag &d);
std::vector<Edge> skeleton(const Pdag &g);

/// Sorted v-structures; for a PDAG only directed edges can form colliders.
std::vector<VStructure> v_structures(const Dag &d);
std::vector<VStructure> v_structures(const Pdag &g);

// --- equivalence relations --------------------------------------------------

bool markov_equivalent(const Dag &d1, const Dag &d2);

/// Markov equivalence plus identical parent sets for every target.
bool i_equivalent(const Dag &d1, const Dag &d2, TargetSet targets);

/// Adds one source node per target (in increasing target order) with a
/// single edge into that target. Node p + k belongs to the k-th target.
Dag augment(const Dag &d, TargetSet targets);

/// Every node is left untouched by at least one member of the family.
bool is_conservative(const TargetFamily &family, int p);

/// Equivalence under hard interventions with a conservative family.
/// Throws PreconditionViolated for a non-conservative family.
bool h_equivalent(const Dag &d1, const Dag &d2, const TargetFamily &family);

/// Equivalence under general interventions. The family must contain the
/// empty set (an observational environment); throws PreconditionViolated
/// otherwise.
bool y_equivalent(const Dag &d1, const Dag &d2, const TargetFamily &family);

// --- completion machinery ---------------------------------------------------

/// Closes a PDAG under Meek rules R1-R4.
Pdag meek_closure(Pdag g);

/// Consistent extension by repeated sink elimination. The highest-index
/// eligible sink is removed first and its undirected edges point into it.
/// Throws NoConsistentExtension if the PDAG admits no extension.
Dag pdag_to_dag(const Pdag &g);

/// CPDAG of the Markov equivalence class of `d`.
Pdag dag_to_cpdag(const Dag &d);

/// Essential graph of the I-equivalence class: the CPDAG with every edge
/// touching a target oriented as in `d`, closed under the Meek rules.
Pdag dag_to_icpdag(const Dag &d, TargetSet targets);

/// Completes the PDAG produced by a search operator into the I-CPDAG of
/// its class: observational completion, re-orientation of edges around
/// targets as in `g`, then Meek closure.
///
/// Throws PreconditionViolated if an undirected edge touches a target.
Pdag gnies_completion(const Pdag &g, TargetSet targets);

// --- enumeration ------------------------------------------------------------

struct EnumerationOptions {
    std::size_t max_members = 1'000'000;
    /// On hitting the cap, return a class flagged truncated instead of
    /// throwing ClassOverflow.
    bool truncate = false;
};

/// All DAGs whose I-CPDAG is `c`. Throws InvalidClassRepresentation if
/// none exists and ClassOverflow past the member cap.
GraphClass enumerate_class(const Pdag &c, TargetSet targets,
                           const EnumerationOptions &options = {});

inline constexpr int kMaxEnumerationNodes = 5;

/// Visits every labelled DAG on p <= 5 nodes exactly once.
void for_each_dag(int p, const std::function<void(const Dag &)> &visit);
std::vector<Dag> enumerate_all_dags(int p);

}  // namespace gnies
