#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnies/graph.hpp"
#include "gnies/metrics.hpp"
#include "gnies/scm.hpp"
#include "gnies/search.hpp"

namespace gnies::io {

using json = nlohmann::ordered_json;

// Graphs: {"p": n, "directed": [[from, to], ...], "undirected": [[i, j], ...]};
// a DAG has an empty "undirected" list.
json to_json(const Dag &d);
json to_json(const Pdag &g);
Dag dag_from_json(const json &j);
Pdag pdag_from_json(const json &j);

json to_json(NodeSet s);
NodeSet node_set_from_json(const json &j);

json to_json(const ScmModel &m);
ScmModel model_from_json(const json &j);
json to_json(const GeneratedScm &g);
GeneratedScm generated_from_json(const json &j);
json to_json(const GenParams &gp);
GenParams gen_params_from_json(const json &j, GenParams defaults = {});

json to_json(const TraceStep &s);
json to_json(const SearchResult &r);
/// Reads back the fields needed for evaluation (graph, targets, scores).
SearchResult result_from_json(const json &j);

json to_json(const MetricReport &r);

json read_json(const std::filesystem::path &path);
/// Writes to a temporary sibling and renames it into place.
void write_text_atomic(const std::filesystem::path &path, const std::string &text);
void write_json(const std::filesystem::path &path, const json &j);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

/// CSV with header x0,...,x{p-1}.
void write_csv(const std::filesystem::path &path, const Eigen::MatrixXd &X);
Eigen::MatrixXd read_csv(const std::filesystem::path &path);

/// env_0.csv, env_1.csv, ... in `dir` (consecutive from 0).
std::vector<Eigen::MatrixXd> read_env_dir(const std::filesystem::path &dir);
void write_env_dir(const std::filesystem::path &dir, const std::vector<Eigen::MatrixXd> &data);

/// One CSV whose first column `env` holds integer labels; environments
/// are returned in increasing label order.
std::vector<Eigen::MatrixXd> read_env_column_csv(const std::filesystem::path &path);

/// Directory -> read_env_dir, file -> read_env_column_csv.
std::vector<Eigen::MatrixXd> read_dataset(const std::filesystem::path &path);

/// Centres and scales each variable by its mean and standard deviation
/// over all environments pooled. Constant variables are only centred.
std::vector<Eigen::MatrixXd> standardize(const std::vector<Eigen::MatrixXd> &data);

}  // namespace gnies::io
