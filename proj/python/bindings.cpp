#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fairsel/analysis.hpp"
#include "fairsel/error.hpp"
#include "fairsel/metrics.hpp"
#include "fairsel/models.hpp"
#include "fairsel/pipeline.hpp"

namespace py = pybind11;
using namespace fairsel;

namespace {

template <std::size_t N>
py::dict metric_dict(const std::array<MetricValue, N>& values) {
  py::dict d;
  for (const auto& mv : values) {
    d[py::str(std::string(metric_code(mv.id)))] = mv.value ? py::cast(*mv.value) : py::none();
  }
  return d;
}

py::object value_obj(const Value& v) { return v ? py::cast(*v) : py::none(); }

}  // namespace

PYBIND11_MODULE(_fairsel, m) {
  m.doc() = "Fairness metrics, cross-validated experiments and metric clustering";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  m.def("metric_catalog", [] {
    py::list out;
    for (const auto& def : metric_catalog()) {
      py::dict d;
      d["id"] = std::string(def.code);
      d["name"] = std::string(def.name);
      d["ideal"] = def.ideal;
      d["family"] = std::string(family_name(def.family));
      out.append(d);
    }
    return out;
  });

  m.def(
      "classification_metrics",
      [](const std::vector<int>& y_true, const std::vector<int>& y_pred, const std::vector<int>& s, double alpha) {
        MetricOptions opts;
        opts.alpha = alpha;
        return metric_dict(compute_classification_metrics(y_true, y_pred, s, opts));
      },
      py::arg("y_true"), py::arg("y_pred"), py::arg("s"), py::arg("alpha") = 2.0);

  m.def(
      "dataset_metrics",
      [](const std::vector<int>& y, const std::vector<int>& s, const Eigen::MatrixXd& X,
         const std::vector<double>& weights, int k_neighbors, double concentration) {
        MetricOptions opts;
        opts.k_neighbors = k_neighbors;
        opts.concentration = concentration;
        return metric_dict(compute_dataset_metrics(y, s, X, weights, opts));
      },
      py::arg("y"), py::arg("s"), py::arg("X"), py::arg("weights") = std::vector<double>{},
      py::arg("k_neighbors") = 5, py::arg("concentration") = 1.0);

  m.def(
      "generalized_entropy_index",
      [](std::vector<double> b, double alpha) {
        return value_obj(generalized_entropy_index(BenefitVector::from_values(std::move(b)), alpha));
      },
      py::arg("b"), py::arg("alpha") = 2.0);
  m.def("theil_index", [](std::vector<double> b) { return value_obj(theil_index(BenefitVector::from_values(std::move(b)))); });
  m.def(
      "smoothed_edf",
      [](const std::vector<double>& pos, const std::vector<double>& totals, double concentration) {
        return value_obj(smoothed_edf(pos, totals, concentration));
      },
      py::arg("pos"), py::arg("totals"), py::arg("concentration") = 1.0);

  m.def("reweigh", [](const std::vector<int>& y, const std::vector<int>& s) {
    const auto w = reweigh(y, s);
    return w.apply(y, s);
  });

  m.def(
      "fit_predict_logistic",
      [](const Eigen::MatrixXd& X, const std::vector<int>& y, std::vector<double> weights, double l2) {
        if (weights.empty()) weights.assign(y.size(), 1.0);
        LogisticConfig cfg;
        cfg.l2_strength = l2;
        const auto model = train_logistic(X, y, weights, cfg);
        return py::make_tuple(model.coefficients, model.intercept, predict_labels(model, X));
      },
      py::arg("X"), py::arg("y"), py::arg("weights") = std::vector<double>{}, py::arg("l2") = 1.0);

  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) {
    return value_obj(spearman(std::span<const double>(x), std::span<const double>(y)));
  });

  m.def("agglomerate", [](const Eigen::MatrixXd& d) {
    const auto dg = agglomerate(d);
    py::list merges;
    for (const auto& mg : dg.merges) merges.append(py::make_tuple(mg.left, mg.right, mg.height, mg.size));
    const double cut = dg.merges.empty() ? 1.0 : select_cut(dg);
    return py::make_tuple(merges, cut, extract_clusters(dg, cut));
  });

  m.def(
      "run_experiment",
      [](const std::vector<std::pair<std::string, std::string>>& datasets, const std::string& out_dir,
         const std::vector<std::string>& models, int jobs) {
        RunConfig cfg;
        for (const auto& [data, spec] : datasets) cfg.datasets.push_back({data, spec});
        cfg.experiment.models.clear();
        for (const auto& mname : models) cfg.experiment.models.push_back(canonical_model_name(mname));
        cfg.experiment.jobs = jobs;
        ExperimentRun run;
        {
          py::gil_scoped_release release;
          run = run_experiment_from_config(cfg);
          write_experiment_outputs(out_dir, run);
        }
        return py::make_tuple(run.result.samples.records.size(), run.result.partial());
      },
      py::arg("datasets"), py::arg("out_dir"), py::arg("models") = std::vector<std::string>{"baseline", "rw"},
      py::arg("jobs") = 1);

  m.def(
      "analyze",
      [](const std::string& results_path, const std::string& out_dir, const std::string& scope) {
        AnalysisConfig cfg;
        cfg.scope = parse_scope(scope);
        const auto samples = read_results_file(results_path);
        const auto res = write_analysis_outputs(out_dir, samples, cfg);
        py::list clusters;
        for (const auto& c : res.classification.clusters) {
          py::list ids;
          for (const auto id : c.metrics) ids.append(std::string(metric_code(id)));
          clusters.append(ids);
        }
        return clusters;
      },
      py::arg("results_path"), py::arg("out_dir"), py::arg("scope") = "avg");
}
