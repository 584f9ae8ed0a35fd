#include "gnies/scm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "gnies/errors.hpp"
#include "gnies/graph_algorithms.hpp"
#include "gnies/random.hpp"

namespace gnies {

Dag ScmModel::graph() const {
    const int p = num_nodes();
    std::vector<NodeSet> pa(p);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
            if (B(i, j) != 0.0) pa[i].insert(j);
        }
    }
    return Dag::from_parents(std::move(pa));
}

Eigen::MatrixXd ScmModel::connectivity(int env) const {
    Eigen::MatrixXd out = B;
    for (int t : hard_targets.at(env)) out.row(t).setZero();
    return out;
}

void ScmModel::validate() {
    const int p = num_nodes();
    if (B.cols() != p) throw InvalidArgument("connectivity matrix must be square");
    if (p > kMaxNodes) throw InvalidArgument("too many variables");
    if (omegas.empty()) throw InvalidArgument("model needs at least one environment");
    for (const auto &w : omegas) {
        if (w.size() != p) throw DimensionMismatch("noise variance vector has wrong length");
        if (!(w.array() > 0.0).all() || !w.allFinite()) {
            throw InvalidArgument("noise variances must be finite and strictly positive");
        }
    }
    if (!B.allFinite()) throw InvalidArgument("connectivity matrix has non-finite entries");
    for (int i = 0; i < p; ++i) {
        if (B(i, i) != 0.0) throw InvalidArgument("connectivity matrix has a self loop");
    }
    if (hard_targets.empty()) hard_targets.assign(omegas.size(), {});
    if (hard_targets.size() != omegas.size()) {
        throw DimensionMismatch("one hard-target annotation per environment required");
    }
    for (auto h : hard_targets) {
        if (!h.is_subset_of(NodeSet::range(p))) throw InvalidArgument("hard target out of range");
    }
    (void)graph();  // throws on a cyclic support
}

ScmModel make_scm(Eigen::MatrixXd B, std::vector<Eigen::VectorXd> omegas,
                  std::vector<NodeSet> hard_targets) {
    ScmModel m{std::move(B), std::move(omegas), std::move(hard_targets)};
    m.validate();
    return m;
}

namespace {

void check_env(const ScmModel &m, int env) {
    if (env < 0 || env >= m.num_envs()) {
        throw InvalidArgument("environment " + std::to_string(env) + " out of range");
    }
}

// (I - B)^{-1} for a DAG-supported B.
Eigen::MatrixXd mixing_matrix(const Eigen::MatrixXd &B) {
    const auto p = B.rows();
    return (Eigen::MatrixXd::Identity(p, p) - B).partialPivLu().inverse();
}

}  // namespace

Eigen::MatrixXd entailed_covariance(const ScmModel &m, int env) {
    check_env(m, env);
    const Eigen::MatrixXd A = mixing_matrix(m.connectivity(env));
    Eigen::MatrixXd sigma = A * m.omegas[env].asDiagonal() * A.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

Eigen::MatrixXd sample(const ScmModel &m, int env, int n, std::uint64_t seed) {
    check_env(m, env);
    if (n < 1) throw InvalidArgument("sample size must be positive");
    const int p = m.num_nodes();
    const Eigen::MatrixXd A = mixing_matrix(m.connectivity(env));
    const Eigen::VectorXd sd = m.omegas[env].cwiseSqrt();
    Rng rng(seed);
    Eigen::MatrixXd noise(n, p);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < p; ++c) noise(r, c) = sd(c) * rng.normal();
    }
    return noise * A.transpose();
}

void GenParams::validate() const {
    auto ordered = [](Range r, const char *name) {
        if (!(r.lo <= r.hi)) throw InvalidArgument(std::string(name) + " range is not ordered");
    };
    if (p < 2 || p > kMaxNodes) throw InvalidArgument("p must lie in [2, 64]");
    if (!(avg_degree >= 0.0)) throw InvalidArgument("average degree must be non-negative");
    ordered(weight_range, "weight");
    ordered(variance_range, "variance");
    ordered(intervention_variance_range, "intervention variance");
    if (!(variance_range.lo > 0.0) || !(intervention_variance_range.lo > 0.0)) {
        throw InvalidArgument("variances must be positive");
    }
    if (n_envs < 1) throw InvalidArgument("at least one environment required");
    if (n_envs > p) throw InvalidArgument("more environments than distinct targets available");
}

GeneratedScm random_scm(const GenParams &params) {
    params.validate();
    const int p = params.p;
    Rng rng(params.seed);

    // Draw order: permutation, edges and weights, base variances, targets
    // and their variances.
    std::vector<int> order(p);
    for (int i = 0; i < p; ++i) order[i] = i;
    rng.shuffle(order);

    const double edge_prob = std::min(1.0, params.avg_degree / (p - 1));
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(p, p);
    for (int a = 0; a < p; ++a) {
        for (int b = a + 1; b < p; ++b) {
            if (rng.uniform() < edge_prob) {
                B(order[b], order[a]) = rng.uniform(params.weight_range.lo, params.weight_range.hi);
            }
        }
    }

    Eigen::VectorXd base(p);
    for (int i = 0; i < p; ++i) {
        base(i) = rng.uniform(params.variance_range.lo, params.variance_range.hi);
    }

    std::vector<int> candidates(p);
    for (int i = 0; i < p; ++i) candidates[i] = i;
    GeneratedScm out;
    out.order = order;
    out.env_targets.push_back(-1);
    std::vector<Eigen::VectorXd> omegas{base};
    std::vector<NodeSet> hard(params.n_envs);
    for (int e = 1; e < params.n_envs; ++e) {
        // Partial Fisher-Yates: candidates[e-1] becomes a fresh target.
        const int k = e - 1;
        std::swap(candidates[k], candidates[k + rng.below(p - k)]);
        const int target = candidates[k];
        Eigen::VectorXd w = base;
        w(target) = rng.uniform(params.intervention_variance_range.lo,
                                params.intervention_variance_range.hi);
        omegas.push_back(std::move(w));
        if (params.intervention_kind == InterventionKind::hard) hard[e].insert(target);
        out.env_targets.push_back(target);
        out.targets.insert(target);
    }
    out.model = make_scm(std::move(B), std::move(omegas), std::move(hard));
    return out;
}

TargetSet intervention_targets(const ScmModel &m) {
    TargetSet out;
    for (int e = 0; e < m.num_envs(); ++e) {
        for (int j = 0; j < m.num_nodes(); ++j) {
            if (m.omegas[e](j) != m.omegas[0](j)) out.insert(j);
        }
        if (e < static_cast<int>(m.hard_targets.size())) out |= m.hard_targets[e];
    }
    return out;
}

bool check_intervention_heterogeneity(const ScmModel &m) {
    const int p = m.num_nodes();
    for (int e = 0; e < m.num_envs(); ++e) {
        for (int f = e + 1; f < m.num_envs(); ++f) {
            std::vector<double> ratios;
            for (int j = 0; j < p; ++j) {
                if (m.omegas[e](j) != m.omegas[f](j)) ratios.push_back(m.omegas[e](j) / m.omegas[f](j));
            }
            for (std::size_t a = 0; a < ratios.size(); ++a) {
                for (std::size_t b = a + 1; b < ratios.size(); ++b) {
                    const double scale = std::max(std::abs(ratios[a]), std::abs(ratios[b]));
                    if (std::abs(ratios[a] - ratios[b]) <= 1e-12 * scale) return false;
                }
            }
        }
    }
    return true;
}

namespace {

struct Regression {
    Eigen::VectorXd coef;  // indexed like the parent set's members
    double residual = 0.0;
};

// Population regression of `node` on `parents` under covariance sigma.
Regression regress(const Eigen::MatrixXd &sigma, int node, NodeSet parents) {
    const auto idx = parents.to_vector();
    const int k = static_cast<int>(idx.size());
    Regression r;
    if (k == 0) {
        r.coef.resize(0);
        r.residual = sigma(node, node);
        return r;
    }
    Eigen::MatrixXd s_pp(k, k);
    Eigen::VectorXd s_pi(k);
    for (int a = 0; a < k; ++a) {
        s_pi(a) = sigma(idx[a], node);
        for (int b = 0; b < k; ++b) s_pp(a, b) = sigma(idx[a], idx[b]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s_pp);
    if (llt.info() != Eigen::Success) {
        throw SingularSystem("singular covariance submatrix in population regression");
    }
    r.coef = llt.solve(s_pi);
    r.residual = sigma(node, node) - s_pi.dot(r.coef);
    return r;
}

}  // namespace

std::vector<EquivalentModel> equivalent_models_oracle(const ScmModel &m, double tol) {
    const int p = m.num_nodes();
    if (p > kMaxEnumerationNodes) throw InvalidArgument("oracle supports p <= 5");
    const int n_envs = m.num_envs();
    std::vector<Eigen::MatrixXd> sigmas;
    for (int e = 0; e < n_envs; ++e) sigmas.push_back(entailed_covariance(m, e));

    // Regressions depend only on (env, node, parent set): tabulate lazily.
    const std::size_t n_sets = std::size_t{1} << p;
    std::vector<std::vector<std::vector<std::optional<Regression>>>> table(
        n_envs, std::vector<std::vector<std::optional<Regression>>>(
                    p, std::vector<std::optional<Regression>>(n_sets)));
    auto lookup = [&](int e, int i, NodeSet pa) -> const Regression & {
        auto &slot = table[e][i][pa.bits()];
        if (!slot) slot = regress(sigmas[e], i, pa);
        return *slot;
    };

    std::vector<EquivalentModel> out;
    for_each_dag(p, [&](const Dag &d) {
        EquivalentModel cand{d, Eigen::MatrixXd::Zero(p, p), {}};
        for (int e = 0; e < n_envs; ++e) {
            Eigen::MatrixXd Be = Eigen::MatrixXd::Zero(p, p);
            Eigen::VectorXd we(p);
            for (int i = 0; i < p; ++i) {
                const Regression &r = lookup(e, i, d.parents(i));
                int a = 0;
                for (int j : d.parents(i)) Be(i, j) = r.coef(a++);
                we(i) = r.residual;
            }
            if ((we.array() <= 0.0).any()) {
                throw SingularSystem("non-positive residual variance in population regression");
            }
            if (e == 0) {
                cand.B = Be;
            } else if ((Be - cand.B).cwiseAbs().maxCoeff() > tol) {
                return;
            }
            const Eigen::MatrixXd A = mixing_matrix(Be);
            const Eigen::MatrixXd rebuilt = A * we.asDiagonal() * A.transpose();
            if ((rebuilt - sigmas[e]).cwiseAbs().maxCoeff() > tol) return;
            cand.omegas.push_back(std::move(we));
        }
        out.push_back(std::move(cand));
    });
    return out;
}

GraphClass equivalent_graphs_oracle(const ScmModel &m, double tol) {
    std::vector<Dag> graphs;
    for (auto &em : equivalent_models_oracle(m, tol)) graphs.push_back(std::move(em.graph));
    return GraphClass(std::move(graphs));
}

GraphClass sparsest_members(const GraphClass &cls) {
    int fewest = std::numeric_limits<int>::max();
    for (const auto &d : cls.members()) fewest = std::min(fewest, d.num_edges());
    std::vector<Dag> out;
    for (const auto &d : cls.members()) {
        if (d.num_edges() == fewest) out.push_back(d);
    }
    return GraphClass(std::move(out), cls.truncated());
}

bool check_model_truthfulness(const ScmModel &m, double tol) {
    if (!(tol > 0.0)) throw InvalidArgument("truthfulness tolerance must be positive");
    const int p = m.num_nodes();
    const Eigen::MatrixXd A = mixing_matrix(m.B);
    for (const auto &em : equivalent_models_oracle(m, tol)) {
        const Eigen::MatrixXd M = (Eigen::MatrixXd::Identity(p, p) - em.B) * A;
        if ((M.diagonal().array().abs() <= tol).any()) return false;
    }
    return true;
}

}  // namespace gnies
