#include "gnies/score.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>

#include "gnies/errors.hpp"

namespace gnies {

long SufficientStats::total() const {
    long n = 0;
    for (long x : ns) n += x;
    return n;
}

Eigen::MatrixXd SufficientStats::pooled() const {
    const int p = num_nodes();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
    for (int e = 0; e < num_envs(); ++e) out += static_cast<double>(ns[e]) * sigmas[e];
    return out / static_cast<double>(total());
}

void SufficientStats::validate() const {
    if (sigmas.empty()) throw InvalidArgument("statistics need at least one environment");
    if (sigmas.size() != ns.size()) throw DimensionMismatch("one sample count per environment");
    const int p = num_nodes();
    if (p < 1 || p > kMaxNodes) throw InvalidArgument("variable count out of range");
    for (int e = 0; e < num_envs(); ++e) {
        const auto &s = sigmas[e];
        if (s.rows() != p || s.cols() != p) throw DimensionMismatch("covariance shape mismatch");
        if (!s.allFinite()) throw InvalidArgument("covariance has non-finite entries");
        if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff())) {
            throw InvalidArgument("covariance matrix is not symmetric");
        }
        if (ns[e] < 1) throw InvalidArgument("sample counts must be positive");
    }
}

SufficientStats sufficient_stats(const std::vector<Eigen::MatrixXd> &data) {
    if (data.empty()) throw DataError("no environments given");
    SufficientStats out;
    const auto p = data.front().cols();
    for (std::size_t e = 0; e < data.size(); ++e) {
        const auto &X = data[e];
        if (X.cols() != p) {
            throw DataError("environment " + std::to_string(e) + " has " +
                            std::to_string(X.cols()) + " columns, expected " + std::to_string(p));
        }
        if (X.rows() < 2) {
            throw DataError("environment " + std::to_string(e) + " has fewer than two samples");
        }
        const Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
        Eigen::MatrixXd sigma = centered.transpose() * centered / static_cast<double>(X.rows());
        out.sigmas.push_back(0.5 * (sigma + sigma.transpose()));
        out.ns.push_back(static_cast<long>(X.rows()));
    }
    out.validate();
    return out;
}

double bic_lambda(const SufficientStats &stats) {
    return 0.5 * std::log(static_cast<double>(stats.total()));
}

int local_dof(const LocalKey &key, int num_envs) {
    return key.parents.size() + std::max(key.intervened ? num_envs : 0, 1);
}

namespace {

struct Blocks {
    std::vector<int> idx;
    std::vector<Eigen::MatrixXd> s_pp;  // per env
    std::vector<Eigen::VectorXd> s_pi;
    std::vector<double> s_ii;
};

Blocks extract(const SufficientStats &stats, int node, NodeSet parents) {
    Blocks bl;
    bl.idx = parents.to_vector();
    const int k = static_cast<int>(bl.idx.size());
    for (const auto &sigma : stats.sigmas) {
        Eigen::MatrixXd pp(k, k);
        Eigen::VectorXd pi(k);
        for (int a = 0; a < k; ++a) {
            pi(a) = sigma(bl.idx[a], node);
            for (int c = 0; c < k; ++c) pp(a, c) = sigma(bl.idx[a], bl.idx[c]);
        }
        bl.s_pp.push_back(std::move(pp));
        bl.s_pi.push_back(std::move(pi));
        bl.s_ii.push_back(sigma(node, node));
    }
    return bl;
}

// Residual second moment (e_i - b)' Sigma^e (e_i - b).
double residual_moment(const Blocks &bl, int e, const Eigen::VectorXd &b) {
    if (b.size() == 0) return bl.s_ii[e];
    return bl.s_ii[e] - 2.0 * b.dot(bl.s_pi[e]) + b.dot(bl.s_pp[e] * b);
}

Eigen::VectorXd solve_guarded(const Eigen::MatrixXd &A, const Eigen::VectorXd &rhs,
                              const MleOptions &options, bool &ridge_applied) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) return llt.solve(rhs);
    const double trace = A.trace();
    if (!(trace > 0.0)) throw SingularSystem("parent covariance block is identically zero");
    ridge_applied = true;
    const auto k = A.rows();
    Eigen::MatrixXd reg = A + options.ridge * trace * Eigen::MatrixXd::Identity(k, k);
    llt.compute(reg);
    if (llt.info() != Eigen::Success) throw SingularSystem("parent covariance block is singular");
    return llt.solve(rhs);
}

double neg_objective(const SufficientStats &stats, const std::vector<double> &q,
                     const std::vector<double> &w) {
    double f = 0.0;
    for (int e = 0; e < stats.num_envs(); ++e) {
        f += static_cast<double>(stats.ns[e]) * (std::log(w[e]) + q[e] / w[e]);
    }
    return f;
}

}  // namespace

MleResult local_mle(const LocalKey &key, const SufficientStats &stats, const MleOptions &options) {
    const int p = stats.num_nodes();
    if (key.node < 0 || key.node >= p) throw InvalidArgument("node out of range");
    if (!key.parents.is_subset_of(NodeSet::range(p)) || key.parents.contains(key.node)) {
        throw InvalidArgument("invalid parent set " + key.parents.to_string());
    }
    const int n_envs = stats.num_envs();
    const double N = static_cast<double>(stats.total());
    const Blocks bl = extract(stats, key.node, key.parents);
    const int k = static_cast<int>(bl.idx.size());

    double floor = options.floor_factor * stats.pooled().trace() / p;
    floor = std::max(floor, std::numeric_limits<double>::min());

    MleResult res;
    auto clamp = [&](double v) {
        if (v < floor) {
            res.variance_floored = true;
            return floor;
        }
        return v;
    };

    // Pooled (shared-variance) solution.
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    if (k > 0) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
        for (int e = 0; e < n_envs; ++e) {
            A += static_cast<double>(stats.ns[e]) * bl.s_pp[e];
            rhs += static_cast<double>(stats.ns[e]) * bl.s_pi[e];
        }
        b = solve_guarded(A, rhs, options, res.ridge_applied);
    }
    std::vector<double> q(n_envs);
    for (int e = 0; e < n_envs; ++e) q[e] = residual_moment(bl, e, b);

    if (!key.intervened || n_envs == 1) {
        double pooled = 0.0;
        for (int e = 0; e < n_envs; ++e) pooled += static_cast<double>(stats.ns[e]) * q[e];
        res.b = std::move(b);
        res.omegas = {clamp(pooled / N)};
        res.objective_trace = {
            neg_objective(stats, q, std::vector<double>(n_envs, res.omegas.front()))};
        return res;
    }

    // Alternating optimisation: variances given b, then weighted least
    // squares given the variances.
    std::vector<double> w(n_envs);
    for (int e = 0; e < n_envs; ++e) w[e] = clamp(q[e]);
    double f = neg_objective(stats, q, w);
    res.objective_trace.push_back(f);
    Eigen::VectorXd best_b = b;
    std::vector<double> best_w = w;
    double best_f = f;
    if (k > 0) {
        res.converged = false;
        for (int it = 1; it <= options.max_iterations; ++it) {
            Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
            for (int e = 0; e < n_envs; ++e) {
                const double weight = static_cast<double>(stats.ns[e]) / w[e];
                A += weight * bl.s_pp[e];
                rhs += weight * bl.s_pi[e];
            }
            b = solve_guarded(A, rhs, options, res.ridge_applied);
            for (int e = 0; e < n_envs; ++e) {
                q[e] = residual_moment(bl, e, b);
                w[e] = clamp(q[e]);
            }
            const double f_next = neg_objective(stats, q, w);
            res.objective_trace.push_back(f_next);
            res.iterations = it;
            if (f_next < best_f) {
                best_f = f_next;
                best_b = b;
                best_w = w;
            }
            const bool done = std::abs(f - f_next) <= options.rel_tol * std::max(1.0, std::abs(f));
            f = f_next;
            if (done) {
                res.converged = true;
                break;
            }
        }
    }
    res.b = std::move(best_b);
    res.omegas = std::move(best_w);
    return res;
}

ScoreValue local_score(const LocalKey &key, const SufficientStats &stats, double lambda,
                       const MleOptions &options) {
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
    const MleResult mle = local_mle(key, stats, options);
    const Blocks bl = extract(stats, key.node, key.parents);
    const bool shared = mle.omegas.size() == 1;
    double loglik = 0.0;
    for (int e = 0; e < stats.num_envs(); ++e) {
        const double w = shared ? mle.omegas.front() : mle.omegas[e];
        const double q = residual_moment(bl, e, mle.b);
        loglik += static_cast<double>(stats.ns[e]) *
                  (std::log(2.0 * std::numbers::pi) + std::log(w) + q / w);
    }
    ScoreValue v;
    v.loglik = -0.5 * loglik;
    v.dof = local_dof(key, stats.num_envs());
    v.penalized = v.loglik - lambda * v.dof;
    return v;
}

ScoreValue full_score(const Dag &d, TargetSet targets, const SufficientStats &stats,
                      double lambda, const MleOptions &options) {
    if (d.num_nodes() != stats.num_nodes()) throw DimensionMismatch("graph and data sizes differ");
    ScoreValue total;
    for (int i = 0; i < d.num_nodes(); ++i) {
        const ScoreValue v = local_score({i, d.parents(i), targets.contains(i)}, stats, lambda, options);
        total.loglik += v.loglik;
        total.dof += v.dof;
        total.penalized += v.penalized;
    }
    return total;
}

// ---------------------------------------------------------------------------

std::optional<ScoreValue> ScoreCache::get(const LocalKey &key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        ++misses_;
        return std::nullopt;
    }
    ++hits_;
    return it->second;
}

void ScoreCache::put(const LocalKey &key, const ScoreValue &value) {
    std::unique_lock lock(mutex_);
    entries_.insert_or_assign(key, value);
}

void ScoreCache::invalidate_node(int node) {
    std::unique_lock lock(mutex_);
    std::erase_if(entries_, [node](const auto &kv) { return kv.first.node == node; });
}

void ScoreCache::clear() {
    std::unique_lock lock(mutex_);
    entries_.clear();
}

std::size_t ScoreCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

Scorer::Scorer(std::shared_ptr<const SufficientStats> stats, double lambda,
               std::shared_ptr<ScoreCache> cache, MleOptions options)
    : stats_(std::move(stats)), lambda_(lambda), cache_(std::move(cache)), options_(options) {
    if (!stats_) throw InvalidArgument("scorer needs statistics");
    stats_->validate();
    if (!(lambda_ >= 0.0)) throw InvalidArgument("lambda must be non-negative");
}

ScoreValue Scorer::local(const LocalKey &key) const {
    ScoreValue v;
    if (auto hit = cache_ ? cache_->get(key) : std::nullopt) {
        v = *hit;
    } else {
        v = local_score(key, *stats_, 0.0, options_);
        if (cache_) cache_->put(key, v);
    }
    v.penalized = v.loglik - lambda_ * v.dof;
    return v;
}

ScoreValue Scorer::full(const Dag &d, TargetSet targets) const {
    if (d.num_nodes() != stats_->num_nodes()) throw DimensionMismatch("graph and data sizes differ");
    ScoreValue total;
    for (int i = 0; i < d.num_nodes(); ++i) {
        const ScoreValue v = local(i, d.parents(i), targets.contains(i));
        total.loglik += v.loglik;
        total.dof += v.dof;
        total.penalized += v.penalized;
    }
    return total;
}

}  // namespace gnies
