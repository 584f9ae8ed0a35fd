#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gnies/errors.hpp"
#include "gnies/pipeline.hpp"

namespace py = pybind11;
using namespace gnies;

namespace {

TargetSet to_targets(const std::vector<int> &v) {
    TargetSet s;
    for (int i : v) {
        if (i < 0 || i >= kMaxNodes) throw InvalidArgument("target index out of range");
        s.insert(i);
    }
    return s;
}

std::shared_ptr<const SufficientStats> stats_of(const std::vector<Eigen::MatrixXd> &data, bool standardize) {
    return std::make_shared<const SufficientStats>(sufficient_stats(standardize ? io::standardize(data) : data));
}

Method method_of(const std::string &m) {
    if (m == "greedy") return Method::greedy;
    if (m == "rank") return Method::rank;
    throw InvalidArgument("method must be 'greedy' or 'rank'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Compiled core of the gnies package; see gnies/__init__.py for the Python API.";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", error.ptr());
    py::register_exception<SolverError>(m, "SolverError", error.ptr());

    m.def(
        "fit",
        [](const std::vector<Eigen::MatrixXd> &data, const std::string &method, std::optional<double> lam,
           double lambda_prime, std::optional<std::vector<int>> targets, const std::vector<int> &known_targets,
           bool pooled_ges, int max_targets, int threads, bool turning, bool standardize) {
            pipeline::FitOptions o;
            o.method = method_of(method);
            o.lambda = lam;
            o.lambda_prime = lambda_prime;
            if (targets) o.targets = to_targets(*targets);
            o.known_targets = to_targets(known_targets);
            o.pooled_ges = pooled_ges;
            o.max_targets = max_targets;
            o.threads = threads;
            o.turning = turning;
            const auto stats = stats_of(data, standardize);
            SearchResult r;
            {
                py::gil_scoped_release release;
                r = pipeline::fit(stats, o);
            }
            return pipeline::fit_record(r, *stats, o).dump();
        },
        py::arg("data"), py::arg("method") = "greedy", py::arg("lam") = py::none(), py::arg("lambda_prime") = 0.5,
        py::arg("targets") = py::none(), py::arg("known_targets") = std::vector<int>{},
        py::arg("pooled_ges") = false, py::arg("max_targets") = -1, py::arg("threads") = 0,
        py::arg("turning") = true, py::arg("standardize") = false);

    m.def(
        "generate",
        [](const std::string &config_json) {
            const auto cfg = pipeline::config_from_json(io::json::parse(config_json));
            const auto ds = pipeline::generate(cfg);
            return py::make_tuple(io::to_json(ds.truth).dump(), ds.data);
        },
        py::arg("config_json"));

    m.def(
        "evaluate",
        [](const std::string &model_json, const std::string &result_json, std::size_t max_members, bool truncate) {
            const auto truth = io::generated_from_json(io::json::parse(model_json));
            const auto r = io::result_from_json(io::json::parse(result_json));
            return io::to_json(pipeline::evaluate(truth, r, {.max_members = max_members, .truncate = truncate})).dump();
        },
        py::arg("model_json"), py::arg("result_json"), py::arg("max_members") = 1'000'000,
        py::arg("truncate") = false);

    m.def(
        "score",
        [](const std::string &dag_json, const std::vector<int> &targets, const std::vector<Eigen::MatrixXd> &data,
           std::optional<double> lam) {
            const auto stats = sufficient_stats(data);
            const auto v = full_score(io::dag_from_json(io::json::parse(dag_json)), to_targets(targets), stats,
                                      lam ? *lam : bic_lambda(stats));
            return py::make_tuple(v.loglik, v.dof, v.penalized);
        },
        py::arg("dag_json"), py::arg("targets"), py::arg("data"), py::arg("lam") = py::none());

    m.def(
        "icpdag",
        [](const std::string &dag_json, const std::vector<int> &targets) {
            return io::to_json(dag_to_icpdag(io::dag_from_json(io::json::parse(dag_json)), to_targets(targets)))
                .dump();
        },
        py::arg("dag_json"), py::arg("targets"));

    m.def(
        "enumerate_class",
        [](const std::string &pdag_json, const std::vector<int> &targets) {
            const auto cls = enumerate_class(io::pdag_from_json(io::json::parse(pdag_json)), to_targets(targets));
            std::vector<std::string> out;
            for (const auto &d : cls.members()) out.push_back(io::to_json(d).dump());
            return out;
        },
        py::arg("pdag_json"), py::arg("targets"));

    m.def("read_dataset", [](const std::string &path) { return io::read_dataset(path); }, py::arg("path"));
}
