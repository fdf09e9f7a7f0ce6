#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cfscm/benchmark.hpp"
#include "cfscm/io.hpp"

namespace py = pybind11;
using namespace cfscm;

namespace {

ClassifierKind classifier_from_string(const std::string& s) {
    if (s == "linear") return ClassifierKind::LinearLogistic;
    if (s == "nonlinear") return ClassifierKind::NonlinearLogistic;
    if (s == "forest") return ClassifierKind::RandomForest;
    throw std::invalid_argument("unknown classifier: " + s);
}

ModelKind kind_from_string(const std::string& s) {
    if (s == "LIN") return ModelKind::Linear;
    if (s == "GP") return ModelKind::GP;
    if (s == "BWGP") return ModelKind::BWGP;
    throw std::invalid_argument("unknown model kind: " + s);
}

}  // namespace

PYBIND11_MODULE(_cfscm, m) {
    m.doc() = "counterfactuals and recourse under parametrization ambiguity";

    m.def("zeta_phi", &zeta_phi, py::arg("u"), py::arg("phi"));

    m.def(
        "sample_scm",
        [](const std::string& name, int n, std::uint64_t seed) {
            auto scm = name == "illustrative" ? illustrative_scm(0.0)
                                              : benchmark_scm(name);
            Rng rng(seed);
            Dataset data, noise;
            scm.ancestral_sample(n, rng, data, noise);
            return py::make_tuple(data, noise, scm.graph().nodes);
        },
        py::arg("name"), py::arg("n"), py::arg("seed") = 0,
        "observational samples, noise records, node names");

    m.def(
        "ground_truth_counterfactual",
        [](const std::string& name, const Row& x, const Row& u,
           const std::vector<int>& targets, const std::vector<double>& values) {
            auto scm = name == "illustrative" ? illustrative_scm(0.0)
                                              : benchmark_scm(name);
            Factum f;
            f.x = x;
            f.u = u;
            return ground_truth_counterfactual(scm, f, Intervention{targets, values});
        },
        py::arg("scm"), py::arg("x"), py::arg("u"), py::arg("targets"),
        py::arg("values"));

    m.def("g_forward",
          [](double x, const Eigen::VectorXd& parents, const Eigen::VectorXd& phi,
             int bins, double bound, int hidden) {
              FlowConfig cfg{.bins = bins, .bound = bound, .hidden_dims = hidden,
                             .input_dim = static_cast<int>(parents.size())};
              return g_forward(x, parents, phi, cfg);
          },
          py::arg("x"), py::arg("parents"), py::arg("phi"), py::arg("bins") = 8,
          py::arg("bound") = 3.0, py::arg("hidden") = 8);

    m.def("g_inverse",
          [](double z, const Eigen::VectorXd& parents, const Eigen::VectorXd& phi,
             int bins, double bound, int hidden) {
              FlowConfig cfg{.bins = bins, .bound = bound, .hidden_dims = hidden,
                             .input_dim = static_cast<int>(parents.size())};
              return g_inverse(z, parents, phi, cfg);
          },
          py::arg("z"), py::arg("parents"), py::arg("phi"), py::arg("bins") = 8,
          py::arg("bound") = 3.0, py::arg("hidden") = 8);

    m.def("median_heuristic", &median_heuristic, py::arg("pooled"));
    m.def("mmd", &mmd, py::arg("x"), py::arg("y"), py::arg("bandwidth"));
    m.def("mmd2", &mmd2, py::arg("x"), py::arg("y"), py::arg("bandwidth"));

    py::class_<SCMEnsemble>(m, "Ensemble")
        .def_static(
            "train",
            [](const std::vector<std::string>& nodes,
               const std::vector<std::vector<int>>& parents, const Dataset& data,
               const std::string& kind, int bins, double bound, int hidden,
               double lr, int steps, int mc_samples, double prior_var,
               std::uint64_t seed) {
                CausalGraph g{nodes, parents};
                EnsembleTrainOptions opt;
                opt.kind = kind_from_string(kind);
                opt.flow = FlowConfig{.bins = bins, .bound = bound,
                                      .hidden_dims = hidden, .input_dim = 0};
                opt.train = TrainConfig{.lr = lr, .steps = steps,
                                        .mc_samples = mc_samples,
                                        .prior_var = prior_var, .seed = seed};
                return train_ensemble(g, data, opt);
            },
            py::arg("nodes"), py::arg("parents"), py::arg("data"),
            py::arg("kind") = "BWGP", py::arg("bins") = 8, py::arg("bound") = 6.0,
            py::arg("hidden") = 10, py::arg("lr") = 0.03, py::arg("steps") = 1000,
            py::arg("mc_samples") = 10, py::arg("prior_var") = 0.1,
            py::arg("seed") = 0)
        .def_static("load", &load_ensemble, py::arg("path"))
        .def("save", &save_ensemble, py::arg("path"))
        .def("nodes", [](const SCMEnsemble& e) { return e.graph.nodes; })
        .def(
            "counterfactual",
            [](const SCMEnsemble& e, const Row& factum,
               const std::vector<int>& targets, const std::vector<double>& values,
               int n, std::uint64_t seed) {
                Factum f;
                f.x = factum;
                return counterfactual_sample(e, f, Intervention{targets, values},
                                             n, seed);
            },
            py::arg("factum"), py::arg("targets"), py::arg("values"),
            py::arg("n") = 100, py::arg("seed") = 0)
        .def(
            "interventional",
            [](const SCMEnsemble& e, const std::vector<int>& targets,
               const std::vector<double>& values, int n, std::uint64_t seed) {
                return interventional_sample(e, Intervention{targets, values}, n,
                                             seed, root_source_empirical(e));
            },
            py::arg("targets"), py::arg("values"), py::arg("n") = 100,
            py::arg("seed") = 0);

    m.def(
        "run_benchmark",
        [](const std::string& config_path, std::uint64_t seed,
           const std::string& out_dir) {
            ExperimentConfig cfg = config_from_json(config_path);
            if (seed != 0) cfg.seed = seed;
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            auto rows = run_benchmark(cfg);
            py::list out;
            for (const auto& r : rows) {
                py::dict d;
                d["model"] = r.model;
                d["mode"] = r.mode;
                d["validity"] = r.validity;
                d["cost_mean"] = r.cost_mean;
                d["cost_sd"] = r.cost_sd;
                d["mmd"] = r.mmd_mean;
                d["mmd_se"] = r.mmd_se;
                d["cf_var"] = r.cf_var;
                out.append(std::move(d));
            }
            return out;
        },
        py::arg("config_path"), py::arg("seed") = 0, py::arg("out_dir") = "");

    m.def(
        "illustrative",
        [](std::uint64_t seed, const std::string& out_dir, int steps) {
            IllustrativeConfig cfg;
            cfg.seed = seed;
            cfg.out_dir = out_dir;
            cfg.steps = steps;
            auto s = illustrative_experiment(cfg);
            py::dict d;
            d["mmd_gp"] = s.mmd_gp;
            d["mmd_bwgp"] = s.mmd_bwgp;
            d["band_coverage"] = s.band_coverage;
            d["cf_at_factum_gp"] = s.cf_at_factum_gp;
            d["cf_at_factum_bwgp"] = s.cf_at_factum_bwgp;
            return d;
        },
        py::arg("seed") = 0, py::arg("out_dir") = ".", py::arg("steps") = 4501);

    m.def(
        "train_classifier",
        [](const Dataset& x, const std::vector<int>& labels,
           const std::string& kind, std::uint64_t seed) {
            return train_classifier(x, labels, classifier_from_string(kind), seed);
        },
        py::arg("x"), py::arg("labels"), py::arg("kind") = "linear",
        py::arg("seed") = 0);
    py::class_<Classifier>(m, "Classifier")
        .def("prob", [](const Classifier& h, const Row& x) {
            return classify_prob(h, x);
        });
}
