#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gnies/graph_algorithms.hpp"
#include "gnies/io.hpp"
#include "gnies/metrics.hpp"
#include "gnies/scm.hpp"
#include "gnies/score.hpp"
#include "gnies/search.hpp"

// Building blocks of the command-line pipeline: generate -> fit -> eval.
namespace gnies::pipeline {

struct ExperimentConfig {
    GenParams gen;
    /// Samples per environment; a single value applies to all of them.
    std::vector<int> n{1000};
    /// Seed of the sampling streams; env e uses derive_seed(data_seed, e).
    /// Defaults to derive_seed(gen.seed, 1).
    std::optional<std::uint64_t> data_seed;
    /// lambda' values for `path`; lambda = lambda' * ln N.
    std::vector<double> lambda_grid{0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0};
    Method method = Method::greedy;
    bool standardize = false;
    bool turning = true;
    int threads = 0;
    int max_targets = -1;
    std::filesystem::path out = "gnies_data";

    std::vector<int> samples_per_env() const;
    std::uint64_t resolved_data_seed() const;
    /// Throws InvalidArgument.
    void validate() const;
};

/// Keys missing from `j` keep the values in `defaults`.
ExperimentConfig config_from_json(const io::json &j, ExperimentConfig defaults = {});
io::json to_json(const ExperimentConfig &c);

struct Dataset {
    GeneratedScm truth;
    std::vector<Eigen::MatrixXd> data;
    std::vector<std::uint64_t> env_seeds;
};

Dataset generate(const ExperimentConfig &config);

/// Writes model.json, targets.json, env_<e>.csv and manifest.json into
/// config.out and returns the manifest.
io::json write_dataset(const ExperimentConfig &config, const Dataset &ds);

struct FitOptions {
    Method method = Method::greedy;
    /// Explicit penalty; otherwise lambda' * ln N.
    std::optional<double> lambda;
    double lambda_prime = 0.5;
    /// Known-target mode: a single inner run with these targets.
    std::optional<TargetSet> targets;
    /// Targets every outer candidate must contain.
    TargetSet known_targets;
    /// Pool all environments and run the inner search without targets.
    bool pooled_ges = false;
    int max_targets = -1;
    int threads = 0;
    bool turning = true;
    bool use_cache = true;
};

SufficientStats load_stats(const std::filesystem::path &data, bool standardize);

double resolve_lambda(const FitOptions &opts, const SufficientStats &stats);

/// Optionally reuses `cache`, which must belong to the same statistics.
SearchResult fit(const std::shared_ptr<const SufficientStats> &stats, const FitOptions &opts,
                 const std::shared_ptr<ScoreCache> &cache = nullptr);

/// SearchResult JSON plus lambda_prime and N.
io::json fit_record(const SearchResult &r, const SufficientStats &stats, const FitOptions &opts);

/// One record per grid value, in the given order, plus a lambda' = 0.5 row
/// (marked "bic": true) when the grid lacks one. Shares one score cache.
std::vector<io::json> regularization_path(const std::shared_ptr<const SufficientStats> &stats,
                                          std::vector<double> grid, const FitOptions &opts);

/// Interventional class of the generating DAG. Hard interventions use the
/// hard-intervention class of the environment family instead.
GraphClass truth_class(const GeneratedScm &truth, const EnumerationOptions &opts = {});
GraphClass estimate_class(const SearchResult &r, const EnumerationOptions &opts = {});
MetricReport evaluate(const GeneratedScm &truth, const SearchResult &r, const EnumerationOptions &opts = {});

}  // namespace gnies::pipeline
