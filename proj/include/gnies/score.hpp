#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstddef>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "gnies/graph.hpp"
#include "gnies/node_set.hpp"

namespace gnies {

/// Per-environment sample covariances (1/n normalisation, per-environment
/// centring) and sample counts. All the score ever sees of the data.
struct SufficientStats {
    std::vector<Eigen::MatrixXd> sigmas;
    std::vector<long> ns;

    int num_nodes() const { return sigmas.empty() ? 0 : static_cast<int>(sigmas.front().rows()); }
    int num_envs() const { return static_cast<int>(sigmas.size()); }
    long total() const;
    /// sum_e n_e sigma_e / N
    Eigen::MatrixXd pooled() const;

    /// Throws InvalidArgument / DimensionMismatch on inconsistent shapes,
    /// asymmetric matrices or n_e < 1.
    void validate() const;
};

/// Centres each environment's rows and forms its MLE covariance.
/// Each data matrix is n_e x p with n_e >= 2.
SufficientStats sufficient_stats(const std::vector<Eigen::MatrixXd> &data);

/// (1/2) ln N, the BIC penalty weight.
double bic_lambda(const SufficientStats &stats);

/// A node, its parent set and whether its noise variance may vary across
/// environments.
struct LocalKey {
    int node = 0;
    NodeSet parents;
    bool intervened = false;
    bool operator==(const LocalKey &) const = default;
};

struct LocalKeyHash {
    std::size_t operator()(const LocalKey &k) const noexcept {
        return std::hash<std::uint64_t>{}(k.parents.bits() * 131 + k.node * 2 + k.intervened);
    }
};

struct ScoreValue {
    double loglik = 0.0;
    int dof = 0;
    double penalized = 0.0;
};

struct MleOptions {
    double rel_tol = 1e-8;
    int max_iterations = 200;
    /// Variances are clamped below at floor_factor * trace(pooled) / p.
    double floor_factor = 1e-10;
    /// Ridge (relative to the trace) added to numerically singular systems.
    double ridge = 1e-12;
};

struct MleResult {
    /// Coefficients in increasing order of the parent indices.
    Eigen::VectorXd b;
    /// One shared variance, or one per environment for intervened nodes.
    std::vector<double> omegas;
    int iterations = 0;
    bool converged = true;
    bool variance_floored = false;
    bool ridge_applied = false;
    /// sum_e n_e [ln w_e + q_e / w_e] after initialisation and each sweep.
    std::vector<double> objective_trace;
};

/// Maximum-likelihood regression of key.node on its parents. Shared noise
/// variance in closed form; per-environment variances (intervened, more
/// than one environment) by alternating weighted least squares.
MleResult local_mle(const LocalKey &key, const SufficientStats &stats,
                    const MleOptions &options = {});

/// Free parameters of one node: |S| + max(|E| * [intervened], 1).
int local_dof(const LocalKey &key, int num_envs);

/// Maximised Gaussian log-likelihood of one node (constants included)
/// and its penalised value loglik - lambda * dof.
ScoreValue local_score(const LocalKey &key, const SufficientStats &stats, double lambda,
                       const MleOptions &options = {});

/// Sum of local scores with intervened = (i in targets).
ScoreValue full_score(const Dag &d, TargetSet targets, const SufficientStats &stats,
                      double lambda, const MleOptions &options = {});

/// Thread-safe memo of local scores. Entries hold the log-likelihood and
/// degrees of freedom; they do not depend on lambda.
class ScoreCache {
public:
    std::optional<ScoreValue> get(const LocalKey &key) const;
    void put(const LocalKey &key, const ScoreValue &value);
    /// Drops every entry for `node`.
    void invalidate_node(int node);
    void clear();
    std::size_t size() const;
    std::size_t hits() const { return hits_.load(); }
    std::size_t misses() const { return misses_.load(); }

private:
    mutable std::shared_mutex mutex_;
    std::unordered_map<LocalKey, ScoreValue, LocalKeyHash> entries_;
    mutable std::atomic<std::size_t> hits_{0};
    mutable std::atomic<std::size_t> misses_{0};
};

/// Binds statistics, penalty and an optional shared cache.
class Scorer {
public:
    Scorer(std::shared_ptr<const SufficientStats> stats, double lambda,
           std::shared_ptr<ScoreCache> cache = nullptr, MleOptions options = {});

    ScoreValue local(const LocalKey &key) const;
    ScoreValue local(int node, NodeSet parents, bool intervened) const {
        return local(LocalKey{node, parents, intervened});
    }
    ScoreValue full(const Dag &d, TargetSet targets) const;

    const SufficientStats &stats() const { return *stats_; }
    double lambda() const { return lambda_; }
    const MleOptions &options() const { return options_; }
    const std::shared_ptr<ScoreCache> &cache() const { return cache_; }

private:
    std::shared_ptr<const SufficientStats> stats_;
    double lambda_;
    std::shared_ptr<ScoreCache> cache_;
    MleOptions options_;
};

}  // namespace gnies
