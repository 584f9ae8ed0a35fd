#include "gnies/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gnies/errors.hpp"

namespace gnies {

namespace {

// Directed edges shared by a and b.
int common_edges(const Dag &a, const Dag &b) {
    int n = 0;
    for (int i = 0; i < a.num_nodes(); ++i) n += (a.parents(i) & b.parents(i)).size();
    return n;
}

double recall(const Dag &truth, const Dag &est) {
    const int total = truth.num_edges();
    if (total == 0) return 1.0;
    return static_cast<double>(common_edges(truth, est)) / total;
}

double false_share(const Dag &truth, const Dag &est) {
    const int total = est.num_edges();
    if (total == 0) return 0.0;
    return static_cast<double>(total - common_edges(truth, est)) / total;
}

}  // namespace

MetricReport tdp_fdp(const GraphClass &truth, const GraphClass &est) {
    if (truth.num_nodes() != est.num_nodes()) {
        throw DimensionMismatch("classes over " + std::to_string(truth.num_nodes()) + " and " +
                                std::to_string(est.num_nodes()) + " nodes");
    }
    MetricReport r;
    r.tdp = 1.0;
    r.fdp = 0.0;
    for (const auto &e : est.members()) {
        double best_recall = 0.0, least_false = 1.0;
        for (const auto &t : truth.members()) {
            best_recall = std::max(best_recall, recall(t, e));
            least_false = std::min(least_false, false_share(t, e));
        }
        r.tdp = std::min(r.tdp, best_recall);
        r.fdp = std::max(r.fdp, least_false);
    }
    r.exact = truth == est;
    r.true_class_size = truth.size();
    r.est_class_size = est.size();
    r.truncated = truth.truncated() || est.truncated();
    return r;
}

std::vector<NodeSet> ancestors(const Dag &d) {
    std::vector<NodeSet> anc(d.num_nodes());
    for (int v : d.topological_order()) {
        for (int u : d.parents(v)) anc[v] |= anc[u] | NodeSet::single(u);
    }
    return anc;
}

double varsortability(const Dag &d, const Eigen::VectorXd &variances) {
    if (variances.size() != d.num_nodes()) throw DimensionMismatch("one variance per node expected");
    const auto anc = ancestors(d);
    double hits = 0.0;
    long pairs = 0;
    for (int j = 0; j < d.num_nodes(); ++j) {
        for (int i : anc[j]) {
            const double a = variances(i), b = variances(j);
            ++pairs;
            if (std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b))) {
                hits += 0.5;
            } else if (a < b) {
                hits += 1.0;
            }
        }
    }
    if (pairs == 0) throw InvalidArgument("varsortability needs at least one directed path");
    return hits / static_cast<double>(pairs);
}

double varsortability(const ScmModel &m, int env) {
    return varsortability(m.graph(), entailed_covariance(m, env).diagonal());
}

}  // namespace gnies
