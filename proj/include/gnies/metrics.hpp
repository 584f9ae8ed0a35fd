#pragma once

#include <Eigen/Dense>
#include <cstddef>

#include "gnies/graph.hpp"
#include "gnies/scm.hpp"

namespace gnies {

struct MetricReport {
    double tdp = 0.0;
    double fdp = 0.0;
    /// Member sets are equal.
    bool exact = false;
    std::size_t true_class_size = 0;
    std::size_t est_class_size = 0;
    /// Either class was cut short during enumeration.
    bool truncated = false;
};

/// True and false discovery proportions between two graph classes.
///   TDP = min over estimates of the best recall against a truth member,
///   FDP = max over estimates of the smallest false share against a truth member.
/// A truth member without edges has recall 1; an estimate without edges has
/// false share 0. Throws DimensionMismatch if the node counts differ.
MetricReport tdp_fdp(const GraphClass &truth, const GraphClass &est);

/// Fraction of ancestor/descendant pairs (i ancestor of j) with
/// var[i] < var[j]; ties (relative 1e-9) count one half. Throws
/// InvalidArgument when the graph has no such pair.
double varsortability(const Dag &d, const Eigen::VectorXd &variances);
/// Uses the marginal variances entailed in environment `env`.
double varsortability(const ScmModel &m, int env = 0);

/// Ancestors of every node (excluding the node itself).
std::vector<NodeSet> ancestors(const Dag &d);

}  // namespace gnies
