#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairsel/dataset.hpp"
#include "fairsel/metrics.hpp"
#include "fairsel/models.hpp"

namespace fairsel {

/// Repeated k-fold assignment: assignments[r][row] is the test fold of `row` in repeat r.
struct CvPlan {
  int n_folds = 5;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<int>> assignments;

  std::size_t n_repeats() const { return assignments.size(); }
  std::vector<std::size_t> test_rows(std::size_t repeat, int fold) const;
  std::vector<std::size_t> train_rows(std::size_t repeat, int fold) const;
};

/// Shuffled, unstratified folds whose sizes differ by at most one.
/// Throws std::invalid_argument if n_rows < 2 * n_folds or seeds is empty.
CvPlan make_cv_plan(std::size_t n_rows, std::span<const std::uint64_t> seeds, int n_folds = 5);

struct SampleRecord {
  std::string dataset;
  std::string model;
  int repeat = 0;
  int fold = 0;
  MetricId metric = MetricId::C0;
  Value value;
};

/// Long-format samples: one record per (dataset, model, repeat, fold, metric).
struct MetricSampleMatrix {
  std::vector<SampleRecord> records;

  /// Orders by dataset, model, repeat, fold, then catalog position of the metric.
  void sort_canonical();
};

/// All samples of one (dataset, model) pair, aligned by (repeat, fold).
struct SampleCell {
  std::string dataset;
  std::string model;
  std::vector<std::pair<int, int>> folds;
  std::vector<std::array<Value, kMetricCount>> values;  // one row per fold
  std::array<bool, kMetricCount> present{};              // metric has at least one record

  std::vector<Value> column(MetricId id) const;
};

/// Cells in (dataset, model) order.
std::vector<SampleCell> group_cells(const MetricSampleMatrix& samples);

void write_results_csv(std::ostream& out, const MetricSampleMatrix& samples);
std::string results_csv_string(const MetricSampleMatrix& samples);
/// Throws DataError on malformed content.
MetricSampleMatrix parse_results_csv(std::string_view text);
MetricSampleMatrix read_results_file(const std::string& path);

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int n_folds = 5;
  MetricOptions metric_options;
  LogisticConfig logistic;
  /// Fit min-max scaling once on all rows instead of per training fold.
  bool global_normalize = false;
  std::vector<std::string> models{"baseline", "reweighing"};
  int jobs = 1;
};

struct DatasetFailure {
  std::string dataset;
  std::string message;
};

struct ExperimentResult {
  MetricSampleMatrix samples;
  std::vector<std::string> warnings;
  std::vector<DatasetFailure> failures;

  bool partial() const { return !failures.empty(); }
};

/// Runs repeated cross-validation over unscaled encoded datasets (see encode_table).
/// Per fold and model: fit on train, label test, record C0..C25; record D0..D3 on
/// the (weighted) training rows. Output is canonical and independent of `jobs`.
ExperimentResult run_experiment(std::span<const EncodedDataset> datasets, const ExperimentConfig& config);

}  // namespace fairsel
