#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gnies/graph.hpp"
#include "gnies/node_set.hpp"

namespace gnies {

/// Linear Gaussian SCM X^e = B X^e + eps^e with eps^e ~ N(0, diag(omegas[e])).
///
/// B(i, j) is the weight of the edge j -> i. Hard interventions are stored
/// as per-environment annotations: in environment e the rows of B for the
/// nodes in hard_targets[e] are zeroed when generating data, while B itself
/// stays shared across environments.
struct ScmModel {
    Eigen::MatrixXd B;
    std::vector<Eigen::VectorXd> omegas;
    std::vector<NodeSet> hard_targets;

    int num_nodes() const { return static_cast<int>(B.rows()); }
    int num_envs() const { return static_cast<int>(omegas.size()); }

    /// Graph with an edge j -> i for every non-zero B(i, j).
    Dag graph() const;
    /// B with the rows of environment `env`'s hard targets zeroed.
    Eigen::MatrixXd connectivity(int env) const;

    /// Throws InvalidArgument if shapes disagree, the support of B is
    /// cyclic, a variance is not strictly positive, or there is no
    /// environment. Missing hard-target annotations are filled with empty
    /// sets.
    void validate();
};

/// Builds and validates a model.
ScmModel make_scm(Eigen::MatrixXd B, std::vector<Eigen::VectorXd> omegas,
                  std::vector<NodeSet> hard_targets = {});

/// (I - B_e)^{-1} Omega^e (I - B_e)^{-T}
Eigen::MatrixXd entailed_covariance(const ScmModel &m, int env);

/// n draws (rows) from environment `env`, deterministic in `seed`.
Eigen::MatrixXd sample(const ScmModel &m, int env, int n, std::uint64_t seed);

enum class InterventionKind { noise, hard };

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct GenParams {
    int p = 10;
    double avg_degree = 2.7;
    Range weight_range{0.5, 1.0};
    Range variance_range{1.0, 2.0};
    Range intervention_variance_range{5.0, 10.0};
    int n_envs = 5;
    InterventionKind intervention_kind = InterventionKind::noise;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GeneratedScm {
    ScmModel model;
    /// Union of all intervened nodes.
    TargetSet targets;
    /// Target of each environment, -1 for the observational one.
    std::vector<int> env_targets;
    /// Random topological order used to orient the Erdos-Renyi graph.
    std::vector<int> order;
};

/// Random model: Erdos-Renyi DAG over a random topological order with
/// edge probability avg_degree / (p - 1), uniform weights and variances,
/// an observational environment 0 and one distinct single-node
/// intervention in each further environment.
GeneratedScm random_scm(const GenParams &params);

/// Nodes whose noise variance differs between some pair of environments,
/// together with any hard-intervention targets.
TargetSet intervention_targets(const ScmModel &m);

/// Changed noise variances change by pairwise distinct factors across
/// every pair of environments.
bool check_intervention_heterogeneity(const ScmModel &m);

/// A DAG together with the parameters that reproduce the model's
/// covariances on it.
struct EquivalentModel {
    Dag graph;
    Eigen::MatrixXd B;
    std::vector<Eigen::VectorXd> omegas;
};

/// Brute force over every DAG on p <= 5 nodes: keeps the DAGs whose
/// population regressions reproduce every environment's covariance with a
/// connectivity matrix shared across environments (max-abs tolerance `tol`).
std::vector<EquivalentModel> equivalent_models_oracle(const ScmModel &m, double tol = 1e-7);
GraphClass equivalent_graphs_oracle(const ScmModel &m, double tol = 1e-7);

/// Members of `cls` with the fewest edges.
GraphClass sparsest_members(const GraphClass &cls);

/// For every equivalent model, diag((I - B~)(I - B)^{-1}) has no entry with
/// magnitude <= tol. Throws InvalidArgument for tol <= 0.
bool check_model_truthfulness(const ScmModel &m, double tol = 1e-7);

}  // namespace gnies
