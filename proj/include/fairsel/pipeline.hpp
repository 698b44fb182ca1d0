#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairsel/analysis.hpp"
#include "fairsel/harness.hpp"
#include "fairsel/report.hpp"

namespace fairsel {

struct DatasetSource {
  std::string data_path;
  std::string spec_path;
};

struct RunConfig {
  std::vector<DatasetSource> datasets;
  ExperimentConfig experiment;
  AnalysisConfig analysis;
  std::string out_dir = "out";

  /// Keys: datasets [{data, spec}], seeds, alpha, k_neighbors, concentration,
  /// sensitivity_d, correlation_scope, thresholds {zero_band, one_low, one_high},
  /// global_normalize, models, out. Relative paths resolve against `base_dir`.
  static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
  /// Everything that affects output bytes; `jobs` is left out.
  nlohmann::json to_json() const;
  /// Throws ConfigError unless every numeric parameter is positive and there are exactly 5 seeds.
  void validate() const;
};

RunConfig load_run_config(const std::string& path);

std::string sha256_hex(std::string_view bytes);

/// "baseline" / "rw" / "reweighing" to canonical model names. Throws ConfigError.
std::string canonical_model_name(const std::string& name);

// ---------------------------------------------------------------------------
// metrics

struct MetricRow {
  MetricId id = MetricId::C0;
  Value value;
  FairLabel label = FairLabel::unfair;
};

/// D0..D3 on the whole dataset, plus C0..C25 when a predictions column is given.
/// Predictions are favorable where they match the spec's favorable value.
std::vector<MetricRow> compute_metric_rows(const CsvTable& table, const DatasetSpec& spec,
                                           const std::optional<std::string>& predictions_column,
                                           const MetricOptions& options, const FairThresholds& thresholds);
std::string metric_rows_csv(const std::vector<MetricRow>& rows);

// ---------------------------------------------------------------------------
// experiment

struct ExperimentRun {
  ExperimentResult result;
  std::string results_csv;
  nlohmann::json manifest;
};

/// Loads every dataset (load failures become per-dataset failures) and runs the experiment.
ExperimentRun run_experiment_from_config(const RunConfig& config);
void write_experiment_outputs(const std::string& out_dir, const ExperimentRun& run);

// ---------------------------------------------------------------------------
// analyze

AnalysisResult write_analysis_outputs(const std::string& out_dir, const MetricSampleMatrix& samples,
                                      const AnalysisConfig& config);

// ---------------------------------------------------------------------------
// demo

struct DemoRun {
  std::string name;
  double bias = 0.0;
  int c15_unfair_folds = 0;
  int c15_folds = 0;
  std::optional<int> unfair_percent;
};

struct DemoSummary {
  std::vector<DemoRun> runs;  // biased, then control
  double seconds = 0.0;
};

/// Generates a planted-bias dataset (bias 0.4) and a control (bias 0), then runs
/// experiment and analyze on each under out_dir/biased and out_dir/control.
DemoSummary run_demo(const std::string& out_dir, int jobs = 1, std::size_t rows = 4000);

}  // namespace fairsel
