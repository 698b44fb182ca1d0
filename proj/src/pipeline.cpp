#include "fairsel/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "fairsel/csv.hpp"
#include "fairsel/error.hpp"
#include "fairsel/synthetic.hpp"

namespace fs = std::filesystem;

namespace fairsel {

namespace {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("run config: field '") + key + "' has the wrong type");
  }
}

std::string resolve(const std::string& base, const std::string& path) {
  if (base.empty() || path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path.string());
  out << content;
}

}  // namespace

std::string canonical_model_name(const std::string& name) {
  if (name == "baseline") return "baseline";
  if (name == "rw" || name == "reweighing") return "reweighing";
  throw ConfigError("unknown model '" + name + "' (expected baseline or rw)");
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("run config: top level must be a JSON object");
  RunConfig c;
  if (j.contains("datasets")) {
    if (!j.at("datasets").is_array()) throw ConfigError("run config: 'datasets' must be an array");
    for (const auto& d : j.at("datasets")) {
      if (!d.is_object() || !d.contains("data") || !d.contains("spec")) {
        throw ConfigError("run config: each dataset needs 'data' and 'spec' paths");
      }
      c.datasets.push_back({resolve(base_dir, get_or<std::string>(d, "data", "")),
                            resolve(base_dir, get_or<std::string>(d, "spec", ""))});
    }
  }
  c.experiment.seeds = get_or(j, "seeds", c.experiment.seeds);
  c.experiment.metric_options.alpha = get_or(j, "alpha", c.experiment.metric_options.alpha);
  c.experiment.metric_options.k_neighbors = get_or(j, "k_neighbors", c.experiment.metric_options.k_neighbors);
  c.experiment.metric_options.concentration = get_or(j, "concentration", c.experiment.metric_options.concentration);
  c.experiment.global_normalize = get_or(j, "global_normalize", c.experiment.global_normalize);
  if (j.contains("models")) {
    c.experiment.models.clear();
    for (const auto& m : get_or<std::vector<std::string>>(j, "models", {})) {
      c.experiment.models.push_back(canonical_model_name(m));
    }
  }
  c.analysis.sensitivity_d = get_or(j, "sensitivity_d", c.analysis.sensitivity_d);
  if (j.contains("correlation_scope")) c.analysis.scope = parse_scope(get_or<std::string>(j, "correlation_scope", ""));
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    if (!t.is_object()) throw ConfigError("run config: 'thresholds' must be an object");
    c.analysis.thresholds.zero_band = get_or(t, "zero_band", c.analysis.thresholds.zero_band);
    c.analysis.thresholds.one_low = get_or(t, "one_low", c.analysis.thresholds.one_low);
    c.analysis.thresholds.one_high = get_or(t, "one_high", c.analysis.thresholds.one_high);
  }
  c.out_dir = resolve(base_dir, get_or(j, "out", c.out_dir));
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  auto ds = nlohmann::json::array();
  for (const auto& d : datasets) ds.push_back({{"data", d.data_path}, {"spec", d.spec_path}});
  j["datasets"] = ds;
  j["seeds"] = experiment.seeds;
  j["n_folds"] = experiment.n_folds;
  j["alpha"] = experiment.metric_options.alpha;
  j["k_neighbors"] = experiment.metric_options.k_neighbors;
  j["concentration"] = experiment.metric_options.concentration;
  j["global_normalize"] = experiment.global_normalize;
  j["models"] = experiment.models;
  j["logistic"] = {{"l2_strength", experiment.logistic.l2_strength},
                   {"max_iterations", experiment.logistic.max_iterations},
                   {"tolerance", experiment.logistic.tolerance}};
  j["sensitivity_d"] = analysis.sensitivity_d;
  j["correlation_scope"] = scope_name(analysis.scope);
  j["thresholds"] = {{"zero_band", analysis.thresholds.zero_band},
                     {"one_low", analysis.thresholds.one_low},
                     {"one_high", analysis.thresholds.one_high}};
  return j;
}

void RunConfig::validate() const {
  if (experiment.seeds.size() != 5) {
    throw ConfigError("run config: exactly 5 seeds are required, got " + std::to_string(experiment.seeds.size()));
  }
  const auto& m = experiment.metric_options;
  if (!(m.alpha > 0)) throw ConfigError("run config: alpha must be positive");
  if (m.k_neighbors <= 0) throw ConfigError("run config: k_neighbors must be positive");
  if (!(m.concentration > 0)) throw ConfigError("run config: concentration must be positive");
  if (!(analysis.sensitivity_d > 0)) throw ConfigError("run config: sensitivity_d must be positive");
  const auto& t = analysis.thresholds;
  if (!(t.zero_band > 0) || !(t.one_low > 0) || !(t.one_high > t.one_low)) {
    throw ConfigError("run config: thresholds must be positive with one_low < one_high");
  }
  if (experiment.models.empty()) throw ConfigError("run config: at least one model is required");
  if (experiment.jobs <= 0) throw ConfigError("run config: jobs must be positive");
}

RunConfig load_run_config(const std::string& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  try {
    return RunConfig::from_json(j, fs::path(path).parent_path().string());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::vector<MetricRow> compute_metric_rows(const CsvTable& table, const DatasetSpec& spec,
                                           const std::optional<std::string>& predictions_column,
                                           const MetricOptions& options, const FairThresholds& thresholds) {
  std::vector<std::string> excluded;
  std::optional<std::size_t> pred_idx;
  if (predictions_column) {
    pred_idx = table.column_index(*predictions_column);
    if (!pred_idx) throw ConfigError("predictions column '" + *predictions_column + "' not found");
    excluded.push_back(*predictions_column);
  }
  EncodedDataset data = encode_table(table, spec, excluded);
  data.X = MinMaxScaler::fit(data.X).transform(data.X);

  std::vector<MetricRow> rows;
  if (pred_idx) {
    std::vector<int> y_pred;
    std::size_t next_rejected = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (next_rejected < data.rejected_rows.size() && data.rejected_rows[next_rejected] == r) {
        ++next_rejected;
        continue;
      }
      const std::string& cell = table.rows[r][*pred_idx];
      if (is_missing_cell(cell)) {
        throw DataError("line " + std::to_string(table.line_numbers[r]) + ": missing prediction");
      }
      y_pred.push_back(values_match(cell, spec.favorable_value) ? 1 : 0);
    }
    for (const auto& mv : compute_classification_metrics(data.y, y_pred, data.s, options)) {
      rows.push_back({mv.id, mv.value, label_fair(mv.value, metric_def(mv.id).ideal, thresholds)});
    }
  }
  for (const auto& mv : compute_dataset_metrics(data.y, data.s, data.X, {}, options)) {
    rows.push_back({mv.id, mv.value, label_fair(mv.value, metric_def(mv.id).ideal, thresholds)});
  }
  return rows;
}

std::string metric_rows_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  write_csv_row(out, {"metric_id", "name", "value", "ideal", "label"});
  for (const auto& r : rows) {
    const auto& def = metric_def(r.id);
    write_csv_row(out, {std::string(def.code), std::string(def.name), r.value ? format_double(*r.value) : "",
                        std::to_string(def.ideal), std::string(label_name(r.label))});
  }
  return out.str();
}

ExperimentRun run_experiment_from_config(const RunConfig& config) {
  config.validate();
  if (config.datasets.empty()) throw ConfigError("run config: no datasets given");

  ExperimentRun run;
  std::vector<EncodedDataset> loaded;
  std::vector<DatasetFailure> load_failures;
  auto inputs = nlohmann::json::array();
  for (const auto& src : config.datasets) {
    nlohmann::json entry{{"data", src.data_path}, {"spec", src.spec_path}};
    const std::string spec_text = read_text_file(src.spec_path);
    entry["spec_sha256"] = sha256_hex(spec_text);
    DatasetSpec spec;
    try {
      spec = parse_dataset_spec(spec_text);
    } catch (const ConfigError& e) {
      throw ConfigError(src.spec_path + ": " + e.what());
    }
    entry["name"] = spec.name;
    try {
      const std::string data_text = read_text_file(src.data_path);
      entry["data_sha256"] = sha256_hex(data_text);
      EncodedDataset ds;
      try {
        ds = encode_table(parse_csv(data_text), spec);
      } catch (const DataError& e) {
        throw DataError(src.data_path + ": " + e.what());
      }
      entry["rows"] = ds.row_count();
      entry["rejected_rows"] = ds.rejected_rows.size();
      loaded.push_back(std::move(ds));
    } catch (const DataError& e) {
      load_failures.push_back({spec.name, e.what()});
    } catch (const ConfigError& e) {
      load_failures.push_back({spec.name, e.what()});
    }
    inputs.push_back(std::move(entry));
  }

  run.result = run_experiment(loaded, config.experiment);
  run.result.failures.insert(run.result.failures.begin(), load_failures.begin(), load_failures.end());
  run.results_csv = results_csv_string(run.result.samples);

  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : run.result.failures) failures.push_back({{"dataset", f.dataset}, {"message", f.message}});
  run.manifest["config"] = config.to_json();
  run.manifest["inputs"] = inputs;
  run.manifest["failures"] = failures;
  run.manifest["warnings"] = run.result.warnings;
  run.manifest["partial"] = run.result.partial();
  run.manifest["records"] = run.result.samples.records.size();
  run.manifest["results_sha256"] = sha256_hex(run.results_csv);
  return run;
}

void write_experiment_outputs(const std::string& out_dir, const ExperimentRun& run) {
  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "results.csv", run.results_csv);
  write_file(fs::path(out_dir) / "manifest.json", run.manifest.dump(2) + "\n");
}

AnalysisResult write_analysis_outputs(const std::string& out_dir, const MetricSampleMatrix& samples,
                                      const AnalysisConfig& config) {
  AnalysisResult res = analyze(samples, config);
  fs::create_directories(out_dir);
  for (const auto& [name, content] : render_analysis(res, config).files) write_file(fs::path(out_dir) / name, content);
  return res;
}

DemoSummary run_demo(const std::string& out_dir, int jobs, std::size_t rows) {
  const auto start = std::chrono::steady_clock::now();
  DemoSummary summary;
  const std::pair<const char*, double> variants[] = {{"biased", 0.4}, {"control", 0.0}};
  for (const auto& [name, bias] : variants) {
    const fs::path dir = fs::path(out_dir) / name;
    fs::create_directories(dir);
    SyntheticConfig sc;
    sc.name = name;
    sc.bias = bias;
    sc.rows = rows;
    const std::string csv = synthetic_csv(sc);
    const DatasetSpec spec = synthetic_spec(name);
    write_file(dir / "data.csv", csv);
    write_file(dir / "spec.json", spec.to_json().dump(2) + "\n");

    RunConfig config;
    config.datasets.push_back({(dir / "data.csv").string(), (dir / "spec.json").string()});
    config.experiment.jobs = jobs;
    config.out_dir = dir.string();
    ExperimentRun run = run_experiment_from_config(config);
    write_experiment_outputs(dir.string(), run);
    const AnalysisResult res = write_analysis_outputs(dir.string(), run.result.samples, config.analysis);

    DemoRun dr;
    dr.name = name;
    dr.bias = bias;
    for (const auto& rec : run.result.samples.records) {
      if (rec.model != "baseline" || rec.metric != MetricId::C15) continue;
      ++dr.c15_folds;
      if (label_fair(rec.value, metric_def(MetricId::C15).ideal, config.analysis.thresholds) == FairLabel::unfair) {
        ++dr.c15_unfair_folds;
      }
    }
    const auto it = res.classification.unfair_percent.find(name);
    if (it != res.classification.unfair_percent.end()) dr.unfair_percent = it->second;
    summary.runs.push_back(dr);
  }
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

}  // namespace fairsel
