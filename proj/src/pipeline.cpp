#include "gnies/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "gnies/errors.hpp"
#include "gnies/random.hpp"

namespace gnies::pipeline {

std::vector<int> ExperimentConfig::samples_per_env() const {
    if (n.size() == 1) return std::vector<int>(gen.n_envs, n.front());
    return n;
}

std::uint64_t ExperimentConfig::resolved_data_seed() const {
    return data_seed ? *data_seed : derive_seed(gen.seed, 1);
}

void ExperimentConfig::validate() const {
    gen.validate();
    if (n.empty()) throw InvalidArgument("n must not be empty");
    if (n.size() != 1 && static_cast<int>(n.size()) != gen.n_envs)
        throw InvalidArgument("n must have one entry or one per environment");
    for (int v : n)
        if (v < 2) throw InvalidArgument("every environment needs at least 2 samples");
    for (double l : lambda_grid)
        if (!(l > 0.0) || !std::isfinite(l)) throw InvalidArgument("lambda grid values must be positive");
    if (method == Method::inner) throw InvalidArgument("method must be greedy or rank");
    if (threads < 0) throw InvalidArgument("threads must be non-negative");
}

ExperimentConfig config_from_json(const io::json &j, ExperimentConfig c) {
    if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
    c.gen = io::gen_params_from_json(j, c.gen);
    try {
        if (j.contains("n")) {
            const auto &jn = j.at("n");
            c.n = jn.is_array() ? jn.get<std::vector<int>>() : std::vector<int>{jn.get<int>()};
        }
        if (j.contains("data_seed")) c.data_seed = j.at("data_seed").get<std::uint64_t>();
        if (j.contains("lambda_grid")) c.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
        if (j.contains("method")) {
            const auto m = j.at("method").get<std::string>();
            if (m == "greedy") c.method = Method::greedy;
            else if (m == "rank") c.method = Method::rank;
            else throw InvalidArgument("method must be 'greedy' or 'rank'");
        }
        if (j.contains("standardize")) c.standardize = j.at("standardize").get<bool>();
        if (j.contains("turning")) c.turning = j.at("turning").get<bool>();
        if (j.contains("threads")) c.threads = j.at("threads").get<int>();
        if (j.contains("max_targets")) c.max_targets = j.at("max_targets").get<int>();
        if (j.contains("out")) c.out = j.at("out").get<std::string>();
    } catch (const io::json::exception &e) {
        throw InvalidArgument(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

io::json to_json(const ExperimentConfig &c) {
    io::json j = io::to_json(c.gen);
    j["n"] = c.n;
    j["data_seed"] = c.resolved_data_seed();
    j["lambda_grid"] = c.lambda_grid;
    j["method"] = to_string(c.method);
    j["standardize"] = c.standardize;
    j["turning"] = c.turning;
    j["max_targets"] = c.max_targets;
    return j;
}

Dataset generate(const ExperimentConfig &config) {
    config.validate();
    Dataset ds;
    ds.truth = random_scm(config.gen);
    const auto ns = config.samples_per_env();
    const auto seed = config.resolved_data_seed();
    for (int e = 0; e < config.gen.n_envs; ++e) {
        ds.env_seeds.push_back(derive_seed(seed, static_cast<std::uint64_t>(e)));
        ds.data.push_back(sample(ds.truth.model, e, ns[e], ds.env_seeds.back()));
    }
    return ds;
}

io::json write_dataset(const ExperimentConfig &config, const Dataset &ds) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out);
    const char *kind = config.gen.intervention_kind == InterventionKind::hard ? "hard" : "noise";
    io::write_json(config.out / "model.json", io::to_json(ds.truth));
    io::write_json(config.out / "targets.json", io::json{{"targets", io::to_json(ds.truth.targets)},
                                                         {"env_targets", ds.truth.env_targets},
                                                         {"kind", kind}});
    io::write_env_dir(config.out, ds.data);
    io::json files = io::json::array();
    for (std::size_t e = 0; e < ds.data.size(); ++e) files.push_back("env_" + std::to_string(e) + ".csv");
    io::json manifest{{"kind", kind},
                      {"config", to_json(config)},
                      {"model_seed", config.gen.seed},
                      {"env_seeds", ds.env_seeds},
                      {"n", config.samples_per_env()},
                      {"files", files}};
    io::write_json(config.out / "manifest.json", manifest);
    return manifest;
}

SufficientStats load_stats(const std::filesystem::path &data, bool standardize) {
    auto envs = io::read_dataset(data);
    if (standardize) envs = io::standardize(envs);
    for (const auto &X : envs)
        if (X.rows() < 2) throw DataError("every environment needs at least 2 rows");
    return sufficient_stats(envs);
}

double resolve_lambda(const FitOptions &opts, const SufficientStats &stats) {
    if (opts.lambda) {
        if (!(*opts.lambda >= 0.0) || !std::isfinite(*opts.lambda)) throw InvalidArgument("lambda must be >= 0");
        return *opts.lambda;
    }
    if (!(opts.lambda_prime > 0.0) || !std::isfinite(opts.lambda_prime))
        throw InvalidArgument("lambda' must be positive");
    return opts.lambda_prime * std::log(static_cast<double>(stats.total()));
}

SearchResult fit(const std::shared_ptr<const SufficientStats> &stats, const FitOptions &opts,
                 const std::shared_ptr<ScoreCache> &cache) {
    const double lambda = resolve_lambda(opts, *stats);
    const InnerOptions inner{.start = std::nullopt, .tol = 1e-9, .turning = opts.turning};
    if (opts.pooled_ges) {
        if (opts.targets && !opts.targets->empty()) throw InvalidArgument("--pooled-ges takes no targets");
        // The pooled statistics differ from `stats`, so the cache cannot be reused.
        return inner_fit(pool_stats(*stats), {}, lambda, inner);
    }
    if (opts.targets) {
        const Scorer scorer(stats, lambda, opts.use_cache ? (cache ? cache : std::make_shared<ScoreCache>()) : nullptr);
        return inner_fit(scorer, *opts.targets, inner);
    }
    OuterOptions outer;
    outer.method = opts.method;
    outer.known_targets = opts.known_targets;
    outer.max_targets = opts.max_targets;
    outer.threads = opts.threads;
    outer.use_cache = opts.use_cache;
    outer.cache = cache;
    outer.turning = opts.turning;
    return gnies_fit(stats, lambda, outer);
}

io::json fit_record(const SearchResult &r, const SufficientStats &stats, const FitOptions &opts) {
    io::json j = io::to_json(r);
    j["lambda_prime"] = opts.lambda ? io::json(nullptr) : io::json(opts.lambda_prime);
    j["N"] = stats.total();
    j["num_edges"] = r.icpdag.num_edges();
    return j;
}

std::vector<io::json> regularization_path(const std::shared_ptr<const SufficientStats> &stats,
                                          std::vector<double> grid, const FitOptions &opts) {
    if (grid.empty()) throw InvalidArgument("lambda grid must not be empty");
    for (double l : grid)
        if (!(l > 0.0) || !std::isfinite(l)) throw InvalidArgument("lambda grid values must be positive");
    if (std::find(grid.begin(), grid.end(), 0.5) == grid.end()) grid.push_back(0.5);
    auto cache = opts.use_cache && !opts.pooled_ges ? std::make_shared<ScoreCache>() : nullptr;
    std::vector<io::json> rows;
    for (double l : grid) {
        FitOptions o = opts;
        o.lambda.reset();
        o.lambda_prime = l;
        const auto r = fit(stats, o, cache);
        io::json row = fit_record(r, *stats, o);
        row["bic"] = l == 0.5;
        rows.push_back(std::move(row));
    }
    return rows;
}

GraphClass truth_class(const GeneratedScm &truth, const EnumerationOptions &opts) {
    const Dag d = truth.model.graph();
    const auto &hard = truth.model.hard_targets;
    const bool any_hard = std::any_of(hard.begin(), hard.end(), [](NodeSet s) { return !s.empty(); });
    if (!any_hard) return enumerate_class(dag_to_icpdag(d, truth.targets), truth.targets, opts);
    const TargetFamily family(hard.begin(), hard.end());
    const GraphClass mec = enumerate_class(dag_to_cpdag(d), {}, opts);
    std::vector<Dag> kept;
    for (const auto &m : mec.members())
        if (h_equivalent(d, m, family)) kept.push_back(m);
    if (kept.empty()) kept.push_back(d);  // only when truncation dropped d
    return GraphClass(std::move(kept), mec.truncated());
}

GraphClass estimate_class(const SearchResult &r, const EnumerationOptions &opts) {
    return enumerate_class(r.icpdag, r.targets, opts);
}

MetricReport evaluate(const GeneratedScm &truth, const SearchResult &r, const EnumerationOptions &opts) {
    return tdp_fdp(truth_class(truth, opts), estimate_class(r, opts));
}

}  // namespace gnies::pipeline
