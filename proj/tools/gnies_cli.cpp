#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gnies/errors.hpp"
#include "gnies/pipeline.hpp"

namespace {

using namespace gnies;
namespace fs = std::filesystem;

enum Exit { ok = 0, config_error = 2, data_error = 3, solver_error = 4 };

TargetSet parse_targets(const std::string &text) {
    TargetSet s;
    std::stringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok.empty()) continue;
        int v = -1;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0 || v >= kMaxNodes)
            throw InvalidArgument("bad target '" + tok + "'");
        s.insert(v);
    }
    return s;
}

void emit(const std::string &out, const std::string &text) {
    if (out.empty() || out == "-") std::cout << text << std::flush;
    else io::write_text_atomic(out, text);
}

struct FitFlags {
    std::string data;
    std::string method = "greedy";
    std::optional<double> lambda;
    std::optional<double> lambda_prime;
    std::string targets;
    std::string known_targets;
    bool pooled_ges = false;
    bool standardize = false;
    bool no_turning = false;
    bool no_cache = false;
    int threads = 0;
    int max_targets = -1;
    std::string output;
};

void add_fit_flags(CLI::App *cmd, FitFlags &f, bool with_lambda) {
    cmd->add_option("data", f.data, "Directory of env_<e>.csv files or a CSV with an 'env' column")->required();
    cmd->add_option("--method", f.method, "Outer search: greedy or rank")
        ->check(CLI::IsMember({"greedy", "rank"}));
    if (with_lambda) {
        auto *l = cmd->add_option("--lambda", f.lambda, "Penalty per parameter");
        cmd->add_option("--lambda-prime", f.lambda_prime, "Penalty as a multiple of ln N (0.5 = BIC)")->excludes(l);
        cmd->add_option("--targets", f.targets, "Known-target mode: fit with exactly these targets, e.g. 0,2");
    }
    cmd->add_option("--known-targets", f.known_targets, "Targets every candidate set must contain");
    cmd->add_flag("--pooled-ges", f.pooled_ges, "Pool the environments and run the search without targets");
    cmd->add_flag("--standardize", f.standardize, "Scale each variable to unit pooled variance");
    cmd->add_flag("--no-turning", f.no_turning, "Skip the edge-reversal phase of the inner search");
    cmd->add_flag("--no-cache", f.no_cache, "Disable the local score cache");
    cmd->add_option("--threads", f.threads, "Worker threads (0: GNIES_THREADS or 1)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--max-targets", f.max_targets, "Largest target set considered (-1: p)");
    cmd->add_option("-o,--output", f.output, "Output file (default stdout)");
}

pipeline::FitOptions fit_options(const FitFlags &f) {
    pipeline::FitOptions o;
    o.method = f.method == "rank" ? Method::rank : Method::greedy;
    o.lambda = f.lambda;
    if (f.lambda_prime) o.lambda_prime = *f.lambda_prime;
    if (!f.targets.empty()) o.targets = parse_targets(f.targets);
    o.known_targets = parse_targets(f.known_targets);
    o.pooled_ges = f.pooled_ges;
    o.max_targets = f.max_targets;
    o.threads = f.threads;
    o.turning = !f.no_turning;
    o.use_cache = !f.no_cache;
    if (o.pooled_ges && (o.targets || !o.known_targets.empty()))
        throw InvalidArgument("--pooled-ges cannot be combined with targets");
    return o;
}

std::vector<double> parse_grid(const std::string &text) {
    std::vector<double> grid;
    std::stringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok.empty()) continue;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) throw InvalidArgument("bad grid value '" + tok + "'");
        grid.push_back(v);
    }
    return grid;
}

/// A result file holds one JSON document or JSON lines.
std::vector<io::json> read_results(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), {});
    std::vector<io::json> out;
    try {
        out.push_back(io::json::parse(text));
    } catch (const io::json::exception &) {
        out.clear();
        std::stringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                out.push_back(io::json::parse(line));
            } catch (const io::json::exception &e) {
                throw DataError(path.string() + ": " + e.what());
            }
        }
    }
    if (out.empty()) throw DataError(path.string() + ": no results");
    return out;
}

int run(int argc, char **argv) {
    CLI::App app{"Greedy search for interventional equivalence classes of linear Gaussian models"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "gnies 0.1.0");

    // generate
    auto *gen = app.add_subcommand("generate", "Sample a random model and write its datasets");
    std::string gen_config;
    pipeline::ExperimentConfig cfg;
    std::string out_dir;
    bool hard = false;
    std::vector<int> n;
    std::optional<std::uint64_t> seed, data_seed;
    std::optional<int> p, n_envs;
    std::optional<double> degree;
    gen->add_option("--config", gen_config, "ExperimentConfig JSON; flags override it");
    gen->add_option("--out", out_dir, "Output directory");
    gen->add_option("--p", p, "Number of variables");
    gen->add_option("--avg-degree", degree, "Expected average degree");
    gen->add_option("--n-envs", n_envs, "Environments (the first is observational)");
    gen->add_option("--n", n, "Samples per environment (one value or one per environment)");
    gen->add_option("--seed", seed, "Model seed");
    gen->add_option("--data-seed", data_seed, "Sampling seed");
    gen->add_flag("--hard", hard, "Hard instead of noise interventions");

    // fit
    auto *fit = app.add_subcommand("fit", "Fit an interventional class to data");
    FitFlags ff;
    add_fit_flags(fit, ff, true);

    // path
    auto *path = app.add_subcommand("path", "Fit along a grid of lambda' values (JSON lines)");
    FitFlags pf;
    std::string grid_text;
    std::string path_config;
    add_fit_flags(path, pf, false);
    path->add_option("--grid", grid_text, "Comma-separated lambda' values");
    path->add_option("--config", path_config, "ExperimentConfig JSON supplying lambda_grid and method");

    // eval
    auto *ev = app.add_subcommand("eval", "Compare results with the generating model (JSON lines)");
    std::string model_path, result_path, eval_out;
    std::size_t max_members = 1'000'000;
    bool truncate = false;
    ev->add_option("model", model_path, "model.json written by generate")->required();
    ev->add_option("result", result_path, "Result JSON or JSON lines from fit/path")->required();
    ev->add_option("--max-members", max_members, "Enumeration cap per class");
    ev->add_flag("--truncate", truncate, "Report truncated classes instead of failing");
    ev->add_option("-o,--output", eval_out, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*gen) {
            if (!gen_config.empty()) cfg = pipeline::config_from_json(io::read_json(gen_config), cfg);
            if (p) cfg.gen.p = *p;
            if (degree) cfg.gen.avg_degree = *degree;
            if (n_envs) cfg.gen.n_envs = *n_envs;
            if (!n.empty()) cfg.n = n;
            if (seed) cfg.gen.seed = *seed;
            if (data_seed) cfg.data_seed = data_seed;
            if (hard) cfg.gen.intervention_kind = InterventionKind::hard;
            if (!out_dir.empty()) cfg.out = out_dir;
            cfg.validate();
            const auto manifest = pipeline::write_dataset(cfg, pipeline::generate(cfg));
            std::cout << manifest.dump() << "\n";
        } else if (*fit) {
            const auto opts = fit_options(ff);
            auto stats = std::make_shared<const SufficientStats>(pipeline::load_stats(ff.data, ff.standardize));
            const auto r = pipeline::fit(stats, opts);
            emit(ff.output, pipeline::fit_record(r, *stats, opts).dump(2) + "\n");
        } else if (*path) {
            auto opts = fit_options(pf);
            std::vector<double> grid = pipeline::ExperimentConfig{}.lambda_grid;
            if (!path_config.empty()) {
                const auto c = pipeline::config_from_json(io::read_json(path_config));
                grid = c.lambda_grid;
                opts.method = c.method;
                opts.turning = c.turning;
                opts.max_targets = c.max_targets;
            }
            if (!grid_text.empty()) grid = parse_grid(grid_text);
            auto stats = std::make_shared<const SufficientStats>(pipeline::load_stats(pf.data, pf.standardize));
            std::string text;
            for (const auto &row : pipeline::regularization_path(stats, grid, opts)) text += row.dump() + "\n";
            emit(pf.output, text);
        } else if (*ev) {
            const auto truth = io::generated_from_json(io::read_json(model_path));
            const EnumerationOptions eo{.max_members = max_members, .truncate = truncate};
            const auto truth_cls = pipeline::truth_class(truth, eo);
            std::string text;
            for (const auto &j : read_results(result_path)) {
                const auto r = io::result_from_json(j);
                if (r.icpdag.num_nodes() != truth.model.num_nodes())
                    throw DimensionMismatch("result and model have different numbers of variables");
                io::json row{{"dataset", fs::path(model_path).parent_path().string()},
                             {"method", j.value("method", std::string("inner"))},
                             {"lambda", r.lambda},
                             {"lambda_prime", j.contains("lambda_prime") ? j.at("lambda_prime") : io::json(nullptr)}};
                row.update(io::to_json(tdp_fdp(truth_cls, pipeline::estimate_class(r, eo))));
                text += row.dump() + "\n";
            }
            emit(eval_out, text);
        }
    } catch (const DataError &e) {
        std::cerr << "data error: " << e.what() << "\n";
        return data_error;
    } catch (const DimensionMismatch &e) {
        std::cerr << "data error: " << e.what() << "\n";
        return data_error;
    } catch (const InvalidArgument &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const SolverError &e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return solver_error;
    } catch (const std::filesystem::filesystem_error &e) {
        std::cerr << "data error: " << e.what() << "\n";
        return data_error;
    }
    return ok;
}

}  // namespace

int main(int argc, char **argv) { return run(argc, argv); }
