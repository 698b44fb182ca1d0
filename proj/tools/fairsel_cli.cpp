#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairsel/csv.hpp"
#include "fairsel/error.hpp"
#include "fairsel/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitPartial = 4;

struct Flags {
  std::vector<std::string> data;
  std::vector<std::string> spec;
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
  std::optional<double> alpha;
  std::optional<int> k_neighbors;
  std::optional<double> concentration;
  std::optional<double> sensitivity_d;
  std::string scope;
  bool global_normalize = false;
  std::vector<std::string> models;
  std::string predictions;
  std::string results;
  std::size_t demo_rows = 4000;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Run config JSON");
  cmd->add_option("--out", f.out, "Output directory (or file for metrics)");
  cmd->add_option("--alpha", f.alpha, "Generalized entropy alpha");
  cmd->add_option("--k-neighbors", f.k_neighbors, "Neighbours for consistency");
  cmd->add_option("--concentration", f.concentration, "Dirichlet smoothing for EDF");
}

void add_analysis(CLI::App* cmd, Flags& f) {
  cmd->add_option("--sensitivity-d", f.sensitivity_d, "Sensitivity threshold multiplier");
  cmd->add_option("--correlation-scope", f.scope, "avg or pooled")->check(CLI::IsMember({"avg", "pooled"}));
}

fairsel::RunConfig build_config(const Flags& f) {
  fairsel::RunConfig c;
  if (!f.config.empty()) c = fairsel::load_run_config(f.config);
  if (f.data.size() != f.spec.size()) throw fairsel::ConfigError("--data and --spec must be given in pairs");
  for (std::size_t i = 0; i < f.data.size(); ++i) c.datasets.push_back({f.data[i], f.spec[i]});
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.seeds.empty()) c.experiment.seeds = f.seeds;
  c.experiment.jobs = f.jobs;
  if (f.alpha) c.experiment.metric_options.alpha = *f.alpha;
  if (f.k_neighbors) c.experiment.metric_options.k_neighbors = *f.k_neighbors;
  if (f.concentration) c.experiment.metric_options.concentration = *f.concentration;
  if (f.sensitivity_d) c.analysis.sensitivity_d = *f.sensitivity_d;
  if (!f.scope.empty()) c.analysis.scope = fairsel::parse_scope(f.scope);
  if (f.global_normalize) c.experiment.global_normalize = true;
  if (!f.models.empty()) {
    c.experiment.models.clear();
    for (const auto& m : f.models) c.experiment.models.push_back(fairsel::canonical_model_name(m));
  }
  c.validate();
  return c;
}

void report_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_metrics(const Flags& f) {
  const auto c = build_config(f);
  if (f.data.size() != 1) throw fairsel::ConfigError("metrics takes exactly one --data/--spec pair");
  const auto spec = fairsel::load_dataset_spec(f.spec[0]);
  const auto table = fairsel::read_csv_file(f.data[0]);
  std::optional<std::string> pred;
  if (!f.predictions.empty()) pred = f.predictions;
  std::vector<fairsel::MetricRow> rows;
  try {
    rows = fairsel::compute_metric_rows(table, spec, pred, c.experiment.metric_options, c.analysis.thresholds);
  } catch (const fairsel::DataError& e) {
    throw fairsel::DataError(f.data[0] + ": " + e.what());
  }
  const std::string csv = fairsel::metric_rows_csv(rows);
  if (f.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(f.out, std::ios::binary);
    if (!out) throw fairsel::ConfigError("cannot write file: " + f.out);
    out << csv;
  }
  return kExitOk;
}

int cmd_experiment(const Flags& f) {
  const auto c = build_config(f);
  const auto run = fairsel::run_experiment_from_config(c);
  fairsel::write_experiment_outputs(c.out_dir, run);
  report_warnings(run.result.warnings);
  for (const auto& fail : run.result.failures) std::cerr << "error: " << fail.dataset << ": " << fail.message << "\n";
  std::cout << "wrote " << run.result.samples.records.size() << " records to "
            << (std::filesystem::path(c.out_dir) / "results.csv").string() << "\n";
  if (run.result.samples.records.empty()) return kExitData;
  return run.result.partial() ? kExitPartial : kExitOk;
}

int cmd_analyze(const Flags& f) {
  const auto c = build_config(f);
  std::string results = f.results;
  if (results.empty()) results = (std::filesystem::path(c.out_dir) / "results.csv").string();
  const auto samples = fairsel::read_results_file(results);
  const auto res = fairsel::write_analysis_outputs(c.out_dir, samples, c.analysis);
  report_warnings(res.warnings);
  std::cout << "classification clusters: " << res.classification.clusters.size()
            << ", dataset clusters: " << res.dataset.clusters.size() << "\n";
  return kExitOk;
}

int cmd_demo(const Flags& f) {
  const std::string out = f.out.empty() ? "demo_out" : f.out;
  const auto summary = fairsel::run_demo(out, f.jobs, f.demo_rows);
  for (const auto& r : summary.runs) {
    std::cout << r.name << " (bias " << r.bias << "): C15 unfair in " << r.c15_unfair_folds << "/" << r.c15_folds
              << " folds, classification metrics unfair: "
              << (r.unfair_percent ? std::to_string(*r.unfair_percent) + "%" : std::string("n/a")) << "\n";
  }
  std::cout << "outputs under " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness metric computation, cross-validated experiments and metric clustering"};
  app.require_subcommand(1);
  Flags f;

  auto* metrics = app.add_subcommand("metrics", "Compute all metrics for one dataset (and optional predictions)");
  metrics->add_option("--data", f.data, "Dataset CSV")->required()->expected(1);
  metrics->add_option("--spec", f.spec, "Dataset spec JSON")->required()->expected(1);
  metrics->add_option("--predictions", f.predictions, "Column holding predicted labels");
  add_common(metrics, f);

  auto* experiment = app.add_subcommand("experiment", "Run repeated cross-validation and record metric samples");
  experiment->add_option("--data", f.data, "Dataset CSV (repeatable, paired with --spec)");
  experiment->add_option("--spec", f.spec, "Dataset spec JSON (repeatable)");
  experiment->add_option("--seeds", f.seeds, "Five repeat seeds");
  experiment->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
  experiment->add_flag("--global-normalize", f.global_normalize, "Scale once on all rows instead of per fold");
  experiment->add_option("--models", f.models, "baseline and/or rw")->delimiter(',');
  add_common(experiment, f);
  add_analysis(experiment, f);

  auto* analyze = app.add_subcommand("analyze", "Correlate, cluster and label metrics from results.csv");
  analyze->add_option("--results", f.results, "results.csv (default <out>/results.csv)");
  add_common(analyze, f);
  add_analysis(analyze, f);

  auto* demo = app.add_subcommand("demo", "End-to-end run on bundled synthetic data");
  demo->add_option("--out", f.out, "Output directory");
  demo->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
  demo->add_option("--rows", f.demo_rows, "Rows per synthetic dataset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (metrics->parsed()) return cmd_metrics(f);
    if (experiment->parsed()) return cmd_experiment(f);
    if (analyze->parsed()) return cmd_analyze(f);
    if (demo->parsed()) return cmd_demo(f);
  } catch (const fairsel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fairsel::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
