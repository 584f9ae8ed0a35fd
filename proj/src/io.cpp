#include "gnies/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "gnies/errors.hpp"

namespace gnies::io {

namespace {

std::vector<Edge> edges_from_json(const json &j, const char *key) {
    std::vector<Edge> out;
    if (!j.contains(key)) return out;
    for (const auto &e : j.at(key)) {
        if (!e.is_array() || e.size() != 2) throw InvalidArgument(std::string("edge in '") + key + "' must be a pair");
        out.push_back({e[0].get<int>(), e[1].get<int>()});
    }
    return out;
}

json edges_to_json(const std::vector<Edge> &edges) {
    json a = json::array();
    for (const auto &e : edges) a.push_back({e.from, e.to});
    return a;
}

template <class F>
auto guarded(const char *what, F &&f) {
    try {
        return f();
    } catch (const json::exception &e) {
        throw InvalidArgument(std::string("malformed ") + what + " JSON: " + e.what());
    }
}

json vector_to_json(const Eigen::VectorXd &v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

std::vector<std::string_view> split_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        std::string_view cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
        if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
        out.push_back(cell);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_double(std::string_view cell, const std::string &where) {
    double v = 0.0;
    const char *first = cell.data();
    const char *last = first + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || cell.empty())
        throw DataError(where + ": cannot parse '" + std::string(cell) + "' as a number");
    if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

CsvTable read_table(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    long lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto cells = split_line(line);
        if (!have_header) {
            for (auto c : cells) t.header.emplace_back(c);
            have_header = true;
            continue;
        }
        std::string where = path.string() + ":" + std::to_string(lineno);
        if (cells.size() != t.header.size())
            throw DataError(where + ": expected " + std::to_string(t.header.size()) + " columns, got " +
                            std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (auto c : cells) row.push_back(parse_double(c, where));
        t.rows.push_back(std::move(row));
    }
    if (!have_header) throw DataError(path.string() + ": empty file");
    return t;
}

}  // namespace

json to_json(const Dag &d) {
    return json{{"p", d.num_nodes()}, {"directed", edges_to_json(d.edges())}, {"undirected", json::array()}};
}

json to_json(const Pdag &g) {
    return json{{"p", g.num_nodes()},
                {"directed", edges_to_json(g.directed_edges())},
                {"undirected", edges_to_json(g.undirected_edges())}};
}

Pdag pdag_from_json(const json &j) {
    return guarded("graph", [&] {
        int p = j.at("p").get<int>();
        if (p < 0 || p > kMaxNodes) throw InvalidArgument("graph size out of range");
        auto undirected = edges_from_json(j, "undirected");
        for (auto &e : undirected)
            if (e.from > e.to) std::swap(e.from, e.to);
        return Pdag(p, edges_from_json(j, "directed"), undirected);
    });
}

Dag dag_from_json(const json &j) {
    return guarded("graph", [&] {
        int p = j.at("p").get<int>();
        if (p < 0 || p > kMaxNodes) throw InvalidArgument("graph size out of range");
        if (!edges_from_json(j, "undirected").empty()) throw InvalidArgument("a DAG has no undirected edges");
        auto directed = j.contains("directed") ? edges_from_json(j, "directed") : edges_from_json(j, "edges");
        return Dag(p, directed);
    });
}

json to_json(NodeSet s) {
    json a = json::array();
    for (int v : s) a.push_back(v);
    return a;
}

NodeSet node_set_from_json(const json &j) {
    return guarded("node set", [&] {
        NodeSet s;
        for (const auto &v : j) {
            int i = v.get<int>();
            if (i < 0 || i >= kMaxNodes) throw InvalidArgument("node index out of range");
            s.insert(i);
        }
        return s;
    });
}

json to_json(const ScmModel &m) {
    json B = json::array();
    for (Eigen::Index i = 0; i < m.B.rows(); ++i) B.push_back(vector_to_json(m.B.row(i).transpose()));
    json omegas = json::array();
    for (const auto &w : m.omegas) omegas.push_back(vector_to_json(w));
    json hard = json::array();
    for (int e = 0; e < m.num_envs(); ++e)
        hard.push_back(to_json(e < static_cast<int>(m.hard_targets.size()) ? m.hard_targets[e] : NodeSet{}));
    return json{{"B", B}, {"omegas", omegas}, {"hard_targets", hard}};
}

ScmModel model_from_json(const json &j) {
    return guarded("model", [&] {
        const auto &jb = j.at("B");
        const auto p = static_cast<Eigen::Index>(jb.size());
        Eigen::MatrixXd B(p, p);
        for (Eigen::Index i = 0; i < p; ++i) {
            if (static_cast<Eigen::Index>(jb[i].size()) != p) throw InvalidArgument("B must be square");
            for (Eigen::Index k = 0; k < p; ++k) B(i, k) = jb[i][k].get<double>();
        }
        std::vector<Eigen::VectorXd> omegas;
        for (const auto &jw : j.at("omegas")) {
            if (static_cast<Eigen::Index>(jw.size()) != p) throw DimensionMismatch("omega length differs from p");
            Eigen::VectorXd w(p);
            for (Eigen::Index k = 0; k < p; ++k) w[k] = jw[k].get<double>();
            omegas.push_back(std::move(w));
        }
        std::vector<NodeSet> hard;
        if (j.contains("hard_targets"))
            for (const auto &h : j.at("hard_targets")) hard.push_back(node_set_from_json(h));
        return make_scm(std::move(B), std::move(omegas), std::move(hard));
    });
}

json to_json(const GeneratedScm &g) {
    json j = to_json(g.model);
    j["targets"] = to_json(g.targets);
    j["env_targets"] = g.env_targets;
    j["order"] = g.order;
    return j;
}

GeneratedScm generated_from_json(const json &j) {
    GeneratedScm g;
    g.model = model_from_json(j);
    guarded("model", [&] {
        g.targets = j.contains("targets") ? node_set_from_json(j.at("targets")) : intervention_targets(g.model);
        if (j.contains("env_targets")) g.env_targets = j.at("env_targets").get<std::vector<int>>();
        if (j.contains("order")) g.order = j.at("order").get<std::vector<int>>();
        return 0;
    });
    return g;
}

json to_json(const GenParams &gp) {
    return json{{"p", gp.p},
                {"avg_degree", gp.avg_degree},
                {"weight_range", {gp.weight_range.lo, gp.weight_range.hi}},
                {"variance_range", {gp.variance_range.lo, gp.variance_range.hi}},
                {"intervention_variance_range", {gp.intervention_variance_range.lo, gp.intervention_variance_range.hi}},
                {"n_envs", gp.n_envs},
                {"intervention_kind", gp.intervention_kind == InterventionKind::hard ? "hard" : "noise"},
                {"seed", gp.seed}};
}

GenParams gen_params_from_json(const json &j, GenParams gp) {
    return guarded("config", [&] {
        auto range = [&](const char *key, Range &r) {
            if (!j.contains(key)) return;
            const auto &a = j.at(key);
            if (!a.is_array() || a.size() != 2) throw InvalidArgument(std::string(key) + " must be [lo, hi]");
            r = {a[0].get<double>(), a[1].get<double>()};
        };
        if (j.contains("p")) gp.p = j.at("p").get<int>();
        if (j.contains("avg_degree")) gp.avg_degree = j.at("avg_degree").get<double>();
        range("weight_range", gp.weight_range);
        range("variance_range", gp.variance_range);
        range("intervention_variance_range", gp.intervention_variance_range);
        if (j.contains("n_envs")) gp.n_envs = j.at("n_envs").get<int>();
        if (j.contains("intervention_kind")) {
            auto kind = j.at("intervention_kind").get<std::string>();
            if (kind == "noise") gp.intervention_kind = InterventionKind::noise;
            else if (kind == "hard") gp.intervention_kind = InterventionKind::hard;
            else throw InvalidArgument("intervention_kind must be 'noise' or 'hard'");
        }
        if (j.contains("seed")) gp.seed = j.at("seed").get<std::uint64_t>();
        gp.validate();
        return gp;
    });
}

json to_json(const TraceStep &s) {
    return json{{"kind", to_string(s.kind)}, {"x", s.x}, {"y", s.y}, {"set", to_json(s.set)},
                {"delta", s.delta}, {"score", s.score}};
}

json to_json(const SearchResult &r) {
    json trace = json::array();
    for (const auto &s : r.trace) trace.push_back(to_json(s));
    json outer = json::array();
    for (const auto &s : r.outer_trace) outer.push_back(to_json(s));
    return json{{"icpdag", to_json(r.icpdag)},
                {"targets", to_json(r.targets)},
                {"score", r.score.penalized},
                {"loglik", r.score.loglik},
                {"dof", r.score.dof},
                {"lambda", r.lambda},
                {"method", to_string(r.method)},
                {"trace", trace},
                {"outer_trace", outer},
                {"inner_runs", r.inner_runs}};
}

SearchResult result_from_json(const json &j) {
    return guarded("result", [&] {
        SearchResult r;
        r.icpdag = pdag_from_json(j.at("icpdag"));
        r.targets = node_set_from_json(j.at("targets"));
        r.score.penalized = j.value("score", 0.0);
        r.score.loglik = j.value("loglik", 0.0);
        r.score.dof = j.value("dof", 0);
        r.lambda = j.value("lambda", 0.0);
        auto method = j.value("method", std::string("inner"));
        if (method == "greedy") r.method = Method::greedy;
        else if (method == "rank") r.method = Method::rank;
        else r.method = Method::inner;
        r.inner_runs = j.value("inner_runs", 0);
        return r;
    });
}

json to_json(const MetricReport &r) {
    return json{{"tdp", r.tdp},
                {"fdp", r.fdp},
                {"exact", r.exact},
                {"true_class_size", r.true_class_size},
                {"est_class_size", r.est_class_size},
                {"truncated", r.truncated}};
}

json read_json(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_text_atomic(const std::filesystem::path &path, const std::string &text) {
    auto tmp = path;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << text;
        if (!out.flush()) throw DataError("cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw DataError("cannot move output into " + path.string());
    }
}

void write_json(const std::filesystem::path &path, const json &j) { write_text_atomic(path, j.dump(2) + "\n"); }

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw InvalidArgument("cannot format number");
    return {buf, ptr};
}

void write_csv(const std::filesystem::path &path, const Eigen::MatrixXd &X) {
    std::string out;
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
        if (k) out += ',';
        out += 'x' + std::to_string(k);
    }
    out += '\n';
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index k = 0; k < X.cols(); ++k) {
            if (k) out += ',';
            out += format_double(X(i, k));
        }
        out += '\n';
    }
    write_text_atomic(path, out);
}

Eigen::MatrixXd read_csv(const std::filesystem::path &path) {
    auto t = read_table(path);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t k = 0; k < t.header.size(); ++k) X(i, k) = t.rows[i][k];
    return X;
}

std::vector<Eigen::MatrixXd> read_env_dir(const std::filesystem::path &dir) {
    std::vector<Eigen::MatrixXd> data;
    for (int e = 0;; ++e) {
        auto f = dir / ("env_" + std::to_string(e) + ".csv");
        if (!std::filesystem::exists(f)) break;
        data.push_back(read_csv(f));
        if (data.back().cols() != data.front().cols())
            throw DataError(f.string() + ": column count differs from env_0.csv");
    }
    if (data.empty()) throw DataError(dir.string() + ": no env_0.csv found");
    return data;
}

void write_env_dir(const std::filesystem::path &dir, const std::vector<Eigen::MatrixXd> &data) {
    std::filesystem::create_directories(dir);
    for (std::size_t e = 0; e < data.size(); ++e) write_csv(dir / ("env_" + std::to_string(e) + ".csv"), data[e]);
}

std::vector<Eigen::MatrixXd> read_env_column_csv(const std::filesystem::path &path) {
    auto t = read_table(path);
    if (t.header.empty() || t.header.front() != "env")
        throw DataError(path.string() + ": first column must be 'env'");
    if (t.header.size() < 2) throw DataError(path.string() + ": no variables");
    std::map<long, std::vector<const std::vector<double> *>> groups;
    for (const auto &row : t.rows) {
        double label = row.front();
        if (label != std::floor(label)) throw DataError(path.string() + ": env label must be an integer");
        groups[static_cast<long>(label)].push_back(&row);
    }
    if (groups.empty()) throw DataError(path.string() + ": no rows");
    const auto p = static_cast<Eigen::Index>(t.header.size() - 1);
    std::vector<Eigen::MatrixXd> data;
    for (const auto &[label, rows] : groups) {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), p);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (Eigen::Index k = 0; k < p; ++k) X(i, k) = (*rows[i])[k + 1];
        data.push_back(std::move(X));
    }
    return data;
}

std::vector<Eigen::MatrixXd> read_dataset(const std::filesystem::path &path) {
    if (std::filesystem::is_directory(path)) return read_env_dir(path);
    if (!std::filesystem::exists(path)) throw DataError(path.string() + ": no such file or directory");
    return read_env_column_csv(path);
}

std::vector<Eigen::MatrixXd> standardize(const std::vector<Eigen::MatrixXd> &data) {
    if (data.empty()) return {};
    const Eigen::Index p = data.front().cols();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
    long n = 0;
    for (const auto &X : data) {
        if (X.cols() != p) throw DataError("environments have different numbers of variables");
        sum += X.colwise().sum().transpose();
        n += X.rows();
    }
    if (n == 0) throw DataError("no rows to standardize");
    Eigen::VectorXd mean = sum / static_cast<double>(n);
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(p);
    for (const auto &X : data) ss += (X.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    Eigen::VectorXd sd = (ss / static_cast<double>(n)).cwiseSqrt();
    std::vector<Eigen::MatrixXd> out;
    for (const auto &X : data) {
        Eigen::MatrixXd Y = X.rowwise() - mean.transpose();
        for (Eigen::Index k = 0; k < p; ++k)
            if (sd[k] > 0.0) Y.col(k) /= sd[k];
        out.push_back(std::move(Y));
    }
    return out;
}

}  // namespace gnies::io
