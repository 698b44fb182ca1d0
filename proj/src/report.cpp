#include "fairsel/report.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fairsel/csv.hpp"
#include "fairsel/error.hpp"

namespace fairsel {

namespace {

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

nlohmann::json value_json(const Value& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string code(MetricId id) { return std::string(metric_code(id)); }

}  // namespace

std::string scope_name(CorrelationScope scope) {
  return scope == CorrelationScope::pooled ? "pooled" : "avg";
}

CorrelationScope parse_scope(const std::string& name) {
  if (name == "avg" || name == "per_cell_average") return CorrelationScope::per_cell_average;
  if (name == "pooled") return CorrelationScope::pooled;
  throw ConfigError("unknown correlation scope '" + name + "' (expected avg or pooled)");
}

std::string correlation_csv(const CorrelationMatrix& corr) {
  std::ostringstream out;
  std::vector<std::string> header{"metric"};
  for (const auto id : corr.ids) header.push_back(code(id));
  write_csv_row(out, header);
  for (std::size_t i = 0; i < corr.ids.size(); ++i) {
    std::vector<std::string> row{code(corr.ids[i])};
    for (std::size_t j = 0; j < corr.ids.size(); ++j) {
      row.push_back(corr.rho[i][j] ? format_double(*corr.rho[i][j]) : std::string());
    }
    write_csv_row(out, row);
  }
  return out.str();
}

std::string dendrogram_dot(const Dendrogram& dg, const std::vector<MetricId>& leaves, double cut) {
  std::ostringstream out;
  out << "digraph dendrogram {\n";
  out << "  label=\"average linkage, cut at " << fixed(cut) << "\";\n";
  out << "  node [shape=box];\n";
  for (int i = 0; i < dg.n_leaves; ++i) out << "  n" << i << " [label=\"" << code(leaves[i]) << "\"];\n";
  for (std::size_t k = 0; k < dg.merges.size(); ++k) {
    const auto& m = dg.merges[k];
    const int id = dg.n_leaves + static_cast<int>(k);
    out << "  n" << id << " [shape=ellipse, label=\"" << fixed(m.height) << "\""
        << (m.height < cut ? "" : ", style=dashed") << "];\n";
    out << "  n" << id << " -> n" << m.left << ";\n";
    out << "  n" << id << " -> n" << m.right << ";\n";
  }
  out << "}\n";
  return out.str();
}

std::string dendrogram_ascii(const Dendrogram& dg, const std::vector<MetricId>& leaves, double cut) {
  std::ostringstream out;
  out << "cut height " << fixed(cut) << " (merges marked * lie above the cut)\n";
  if (dg.n_leaves == 0) return out.str();
  std::function<void(int, const std::string&, bool, bool)> draw = [&](int node, const std::string& prefix,
                                                                        bool last, bool root) {
    out << prefix << (root ? "" : (last ? "`-- " : "+-- "));
    if (node < dg.n_leaves) {
      out << code(leaves[node]) << "\n";
      return;
    }
    const auto& m = dg.merges[static_cast<std::size_t>(node - dg.n_leaves)];
    out << "[" << fixed(m.height) << "]" << (m.height < cut ? "" : "*") << "\n";
    const std::string child = root ? prefix : prefix + (last ? "    " : "|   ");
    draw(m.left, child, false, false);
    draw(m.right, child, true, false);
  };
  draw(dg.merges.empty() ? 0 : dg.n_leaves + static_cast<int>(dg.merges.size()) - 1, "", true, true);
  return out.str();
}

nlohmann::json cluster_report_json(const ClusterReport& rep) {
  nlohmann::json j;
  j["cut_height"] = rep.cut_height;
  auto leaves = nlohmann::json::array();
  for (const auto id : rep.correlation.ids) leaves.push_back(code(id));
  j["leaves"] = leaves;
  auto merges = nlohmann::json::array();
  for (const auto& m : rep.dendrogram.merges) {
    merges.push_back({{"left", m.left}, {"right", m.right}, {"height", m.height}, {"size", m.size}});
  }
  j["merges"] = merges;
  auto clusters = nlohmann::json::array();
  for (const auto& c : rep.clusters) {
    nlohmann::json cj;
    cj["id"] = c.id;
    auto ms = nlohmann::json::array();
    for (const auto id : c.metrics) ms.push_back(code(id));
    cj["metrics"] = ms;
    cj["representative"] = code(c.representative);
    cj["sensitivity"] = sensitivity_name(c.sensitivity);
    auto ag = nlohmann::json::array();
    for (const auto& a : c.agreement) {
      ag.push_back({{"dataset", a.dataset}, {"majority", label_name(a.majority)}, {"percent", a.percent}});
    }
    cj["agreement"] = ag;
    clusters.push_back(std::move(cj));
  }
  j["clusters"] = clusters;
  nlohmann::json labels = nlohmann::json::object();
  nlohmann::json medians = nlohmann::json::object();
  for (const auto& [ds, m] : rep.labels) {
    for (const auto& [id, l] : m) {
      labels[ds][code(id)] = label_name(l);
      medians[ds][code(id)] = value_json(rep.medians.at(ds).at(id));
    }
  }
  j["labels"] = labels;
  j["medians"] = medians;
  nlohmann::json unfair = nlohmann::json::object();
  for (const auto& [ds, p] : rep.unfair_percent) unfair[ds] = p;
  j["unfair_percent"] = unfair;
  j["median_unfair_percent"] = value_json(rep.median_unfair_percent);
  j["correlation_cells"] = rep.correlation.cells;
  return j;
}

nlohmann::json analysis_json(const AnalysisResult& res, const AnalysisConfig& config) {
  nlohmann::json j;
  j["correlation_scope"] = scope_name(config.scope);
  j["label_model"] = config.label_model;
  j["classification"] = cluster_report_json(res.classification);
  j["dataset"] = cluster_report_json(res.dataset);
  nlohmann::json verdicts = nlohmann::json::object();
  for (const auto& [id, v] : res.sensitivity.metric_verdicts) verdicts[code(id)] = sensitivity_name(v);
  j["sensitivity"] = {{"d", res.sensitivity.d},
                      {"sigma", res.sensitivity.sigma},
                      {"threshold", res.sensitivity.threshold},
                      {"metric_verdicts", verdicts}};
  j["fair_thresholds"] = {{"zero_band", config.thresholds.zero_band},
                          {"one_low", config.thresholds.one_low},
                          {"one_high", config.thresholds.one_high}};
  return j;
}

std::string sensitivity_csv(const SensitivityReport& rep) {
  std::ostringstream out;
  write_csv_row(out, {"dataset", "model", "metric_id", "median", "iqr", "samples", "flagged"});
  for (const auto& c : rep.cells) {
    write_csv_row(out, {c.dataset, c.model, code(c.metric), c.median ? format_double(*c.median) : std::string(),
                        c.iqr ? format_double(*c.iqr) : std::string(), std::to_string(c.samples),
                        c.flagged ? "1" : "0"});
  }
  return out.str();
}

std::string movement_csv(const std::vector<MovementRow>& rows) {
  std::ostringstream out;
  write_csv_row(out, {"dataset", "model", "UF", "FU", "NC", "excluded"});
  for (const auto& r : rows) {
    write_csv_row(out, {r.dataset, r.model, std::to_string(r.counts.uf), std::to_string(r.counts.fu),
                        std::to_string(r.counts.nc), std::to_string(r.counts.excluded)});
  }
  return out.str();
}

namespace {

void cluster_table_md(std::ostringstream& out, const ClusterReport& rep) {
  out << "| Cluster | MID | Metric |";
  for (const auto& ds : rep.datasets) out << " " << ds << " |";
  out << "\n|---|---|---|";
  for (std::size_t i = 0; i < rep.datasets.size(); ++i) out << "---|";
  out << "\n";
  for (const auto& c : rep.clusters) {
    for (const auto id : c.metrics) {
      out << "| " << c.id << " | " << code(id) << " | " << metric_def(id).name << " |";
      for (const auto& ds : rep.datasets) out << " " << label_name(rep.labels.at(ds).at(id)) << " |";
      out << "\n";
    }
    out << "| | | **Percentage of agreement** |";
    for (const auto& a : c.agreement) out << " **" << a.percent << "%** (" << label_name(a.majority) << ") |";
    out << "\n";
  }
  out << "| | | **Percentage of metrics marking dataset as unfair** |";
  for (const auto& ds : rep.datasets) {
    const auto it = rep.unfair_percent.find(ds);
    out << " " << (it == rep.unfair_percent.end() ? std::string("-") : std::to_string(it->second) + "%") << " |";
  }
  out << "\n\n";

  out << "| Cluster | Members | Representative | Sensitivity |\n|---|---|---|---|\n";
  for (const auto& c : rep.clusters) {
    out << "| " << c.id << " | ";
    for (std::size_t i = 0; i < c.metrics.size(); ++i) out << (i ? ", " : "") << code(c.metrics[i]);
    out << " | " << code(c.representative) << " | " << sensitivity_name(c.sensitivity) << " |\n";
  }
  out << "\n";
}

void sensitivity_md(std::ostringstream& out, const SensitivityReport& rep, const std::vector<MetricId>& ids) {
  std::vector<std::pair<std::string, std::string>> columns;  // (dataset, model)
  for (const auto& c : rep.cells) {
    const auto key = std::make_pair(c.dataset, c.model);
    if (std::find(columns.begin(), columns.end(), key) == columns.end()) columns.push_back(key);
  }
  out << "| MID |";
  for (const auto& [ds, model] : columns) out << " " << ds << " / " << model << " |";
  out << " Verdict |\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
  out << "---|\n";
  for (const auto id : ids) {
    out << "| " << code(id) << " |";
    for (const auto& [ds, model] : columns) {
      const auto it = std::find_if(rep.cells.begin(), rep.cells.end(), [&](const SensitivityCell& c) {
        return c.dataset == ds && c.model == model && c.metric == id;
      });
      if (it == rep.cells.end() || !it->median) {
        out << " - |";
      } else {
        out << " " << fixed(*it->median) << " / " << fixed(*it->iqr) << (it->flagged ? "*" : "") << " |";
      }
    }
    const auto v = rep.metric_verdicts.find(id);
    out << " " << (v == rep.metric_verdicts.end() ? "unknown" : sensitivity_name(v->second)) << " |\n";
  }
  out << "\n";
}

}  // namespace

std::string report_markdown(const AnalysisResult& res, const AnalysisConfig& config) {
  std::ostringstream out;
  out << "# Fairness metric analysis\n\n";
  out << "- Correlation: Spearman, scope `" << scope_name(config.scope) << "` over "
      << res.classification.correlation.cells.size() << " dataset/model cells\n";
  out << "- Labels: median of the `" << config.label_model << "` folds; fair iff within ["
      << fixed(-config.thresholds.zero_band, 2) << ", " << fixed(config.thresholds.zero_band, 2)
      << "] (ideal 0) or [" << fixed(config.thresholds.one_low, 2) << ", " << fixed(config.thresholds.one_high, 2)
      << "] (ideal 1)\n\n";

  out << "## Metrics marking each dataset unfair\n\n";
  out << "| Dataset | Classification metrics | Dataset metrics |\n|---|---|---|\n";
  for (const auto& ds : res.classification.datasets) {
    auto pct = [&](const ClusterReport& r) {
      const auto it = r.unfair_percent.find(ds);
      return it == r.unfair_percent.end() ? std::string("-") : std::to_string(it->second) + "%";
    };
    out << "| " << ds << " | " << pct(res.classification) << " | " << pct(res.dataset) << " |\n";
  }
  out << "\nMedian over datasets (classification metrics): "
      << (res.classification.median_unfair_percent ? fixed(*res.classification.median_unfair_percent, 1) + "%"
                                                   : std::string("-"))
      << "\n\n";

  out << "## Classification metric clusters (cut height " << fixed(res.classification.cut_height) << ")\n\n";
  cluster_table_md(out, res.classification);
  out << "## Dataset metric clusters (cut height " << fixed(res.dataset.cut_height) << ")\n\n";
  cluster_table_md(out, res.dataset);

  out << "## Sensitivity\n\n";
  out << "Cells show median / IQR over folds; `*` marks IQR > d * sigma with d = " << fixed(res.sensitivity.d, 2)
      << ", sigma = " << fixed(res.sensitivity.sigma, 4) << ", threshold = " << fixed(res.sensitivity.threshold, 4)
      << ".\n\n";
  out << "### Classification metrics\n\n";
  sensitivity_md(out, res.sensitivity, classification_metric_ids());
  out << "### Dataset metrics\n\n";
  sensitivity_md(out, res.sensitivity, dataset_metric_ids());

  out << "## Movement under mitigation\n\n";
  if (res.movement.empty()) {
    out << "No mitigated model to compare against the baseline.\n";
  } else {
    out << "UF: moved toward the ideal value. FU: moved away. NC: |change| <= " << fixed(config.movement_epsilon, 4)
        << ".\n\n";
    out << "| Dataset | Model | UF | FU | NC | Excluded |\n|---|---|---|---|---|---|\n";
    for (const auto& r : res.movement) {
      out << "| " << r.dataset << " | " << r.model << " | " << r.counts.uf << " | " << r.counts.fu << " | "
          << r.counts.nc << " | " << r.counts.excluded << " |\n";
    }
  }
  return out.str();
}

AnalysisOutputs render_analysis(const AnalysisResult& res, const AnalysisConfig& config) {
  AnalysisOutputs o;
  o.files.emplace_back("correlation.csv", correlation_csv(res.classification.correlation));
  o.files.emplace_back("correlation_dataset.csv", correlation_csv(res.dataset.correlation));
  o.files.emplace_back("dendrogram.dot",
                       dendrogram_dot(res.classification.dendrogram, res.classification.correlation.ids,
                                      res.classification.cut_height));
  o.files.emplace_back("dendrogram.txt",
                       dendrogram_ascii(res.classification.dendrogram, res.classification.correlation.ids,
                                        res.classification.cut_height));
  o.files.emplace_back("dendrogram_dataset.dot", dendrogram_dot(res.dataset.dendrogram, res.dataset.correlation.ids,
                                                                res.dataset.cut_height));
  o.files.emplace_back("dendrogram_dataset.txt", dendrogram_ascii(res.dataset.dendrogram,
                                                                  res.dataset.correlation.ids, res.dataset.cut_height));
  o.files.emplace_back("clusters.json", analysis_json(res, config).dump(2) + "\n");
  o.files.emplace_back("sensitivity.csv", sensitivity_csv(res.sensitivity));
  o.files.emplace_back("movement.csv", movement_csv(res.movement));
  o.files.emplace_back("report.md", report_markdown(res, config));
  return o;
}

}  // namespace fairsel
