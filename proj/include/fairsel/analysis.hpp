#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairsel/harness.hpp"
#include "fairsel/metrics.hpp"

namespace fairsel {

// ---------------------------------------------------------------------------
// Rank correlation

/// Values closer than this (relative) share a rank, so exact algebraic mirrors
/// such as C2 = -C0 keep |rho| = 1 despite rounding.
inline constexpr double kRankTieTolerance = 1e-12;

/// 1-based fractional ranks; tied values receive the mean of their positions.
std::vector<double> fractional_ranks(std::span<const double> v);

/// Pearson correlation of fractional ranks. Pairs with an Undefined side are
/// dropped; fewer than 3 pairs or a constant side gives Undefined.
Value spearman(std::span<const Value> x, std::span<const Value> y);
Value spearman(std::span<const double> x, std::span<const double> y);

enum class CorrelationScope { per_cell_average, pooled };

struct CorrelationMatrix {
  std::vector<MetricId> ids;
  std::vector<std::vector<Value>> rho;  // symmetric, diagonal 1
  std::vector<std::string> cells;       // "dataset/model" entries that contributed
  CorrelationScope scope = CorrelationScope::per_cell_average;
};

/// per_cell_average: Spearman per (dataset, model) cell over its folds, then the
/// unweighted mean of the defined cell values. pooled: one Spearman over all rows.
CorrelationMatrix correlation_matrix(const std::vector<SampleCell>& cells, std::span<const MetricId> ids,
                                     CorrelationScope scope = CorrelationScope::per_cell_average);

/// 1 - |sim|; Undefined maps to 1.
double dissimilarity(Value sim);
Eigen::MatrixXd dissimilarity_matrix(const CorrelationMatrix& corr);

// ---------------------------------------------------------------------------
// Average-linkage clustering

/// Leaves are 0..n-1; the k-th merge creates cluster n + k.
struct Merge {
  int left = 0;
  int right = 0;
  double height = 0.0;
  int size = 0;
};

struct Dendrogram {
  int n_leaves = 0;
  std::vector<Merge> merges;
};

/// UPGMA. The closest pair wins; ties go to the lexicographically smallest
/// (id, id) pair. Throws std::invalid_argument for a non-square, asymmetric or
/// non-zero-diagonal matrix.
Dendrogram agglomerate(const Eigen::MatrixXd& dissimilarities);

/// Midpoint of the widest gap between consecutive merge heights, with 1.0
/// appended as a final height. The lowest gap wins ties.
double select_cut(const Dendrogram& dendrogram);

/// Connected components of merges with height < cut. Each part is sorted, and
/// parts are ordered by their smallest leaf.
std::vector<std::vector<int>> extract_clusters(const Dendrogram& dendrogram, double cut);

// ---------------------------------------------------------------------------
// Labels and percentages

/// 100 * (majority count) / size, rounded to an integer. Throws on empty input.
int agreement_percentage(std::span<const FairLabel> labels);
/// 100 * unfair / size, rounded to an integer. Throws on empty input.
int unfair_percentage(std::span<const FairLabel> labels);
/// Ties resolve to Unfair.
FairLabel majority_label(std::span<const FairLabel> labels);

/// Linear interpolation between order statistics; `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);
std::optional<double> median(std::span<const Value> values);

// ---------------------------------------------------------------------------
// Sensitivity

enum class Sensitivity { sensitive, insensitive, unknown };
std::string_view sensitivity_name(Sensitivity s);

struct SensitivityCell {
  std::string dataset;
  std::string model;
  MetricId metric = MetricId::C0;
  Value median;
  Value iqr;
  int samples = 0;  // defined samples
  bool flagged = false;
};

struct SensitivityReport {
  double d = 0.35;
  double sigma = 0.0;      // population SD of every defined IQR
  double threshold = 0.0;  // d * sigma
  std::vector<SensitivityCell> cells;
  std::map<MetricId, Sensitivity> metric_verdicts;
  std::vector<std::string> warnings;
};

/// A cell is flagged iff IQR > d * sigma. A metric is insensitive iff fewer
/// than half of its defined cells are flagged.
SensitivityReport sensitivity_table(const std::vector<SampleCell>& cells, double d, std::span<const MetricId> ids,
                                    std::size_t expected_samples = 25);

/// Insensitive iff more than half of the cluster's metrics are insensitive.
Sensitivity cluster_sensitivity(const SensitivityReport& report, std::span<const MetricId> cluster);

// ---------------------------------------------------------------------------
// Movement under mitigation

enum class Movement { toward_ideal, away_from_ideal, no_change, excluded };
std::string_view movement_code(Movement m);  // UF, FU, NC, excluded

struct MovementCounts {
  int uf = 0;  // moved toward the ideal value
  int fu = 0;  // moved away from it
  int nc = 0;
  int excluded = 0;
  std::vector<Movement> per_metric;
};

/// delta = |mitigated - ideal| - |baseline - ideal|; delta < -eps is UF,
/// delta > eps is FU, otherwise NC. Undefined on either side is excluded.
MovementCounts movement_counts(std::span<const Value> baseline, std::span<const Value> mitigated,
                               std::span<const int> ideals, double epsilon = 1e-3);

// ---------------------------------------------------------------------------
// Full analysis

struct AnalysisConfig {
  CorrelationScope scope = CorrelationScope::per_cell_average;
  double sensitivity_d = 0.35;
  double movement_epsilon = 1e-3;
  FairThresholds thresholds;
  /// Model whose per-dataset medians are labelled Fair/Unfair.
  std::string label_model = "baseline";
};

struct DatasetAgreement {
  std::string dataset;
  FairLabel majority = FairLabel::unfair;
  int percent = 0;
};

struct ClusterInfo {
  int id = 0;
  std::vector<MetricId> metrics;
  MetricId representative = MetricId::C0;
  Sensitivity sensitivity = Sensitivity::unknown;
  std::vector<DatasetAgreement> agreement;
};

struct ClusterReport {
  std::string group;  // "classification" or "dataset"
  CorrelationMatrix correlation;
  Dendrogram dendrogram;
  double cut_height = 0.0;
  std::vector<ClusterInfo> clusters;
  std::vector<std::string> datasets;
  /// Per dataset: the median-based label of every metric of this group.
  std::map<std::string, std::map<MetricId, FairLabel>> labels;
  std::map<std::string, std::map<MetricId, Value>> medians;
  std::map<std::string, int> unfair_percent;
  std::optional<double> median_unfair_percent;
};

struct MovementRow {
  std::string dataset;
  std::string model;
  MovementCounts counts;
};

struct AnalysisResult {
  ClusterReport classification;
  ClusterReport dataset;
  SensitivityReport sensitivity;
  std::vector<MovementRow> movement;
  std::vector<std::string> warnings;
};

ClusterReport build_cluster_report(const std::vector<SampleCell>& cells, std::span<const MetricId> ids,
                                   const std::string& group, const SensitivityReport& sensitivity,
                                   const AnalysisConfig& config);

AnalysisResult analyze(const MetricSampleMatrix& samples, const AnalysisConfig& config = {});

}  // namespace fairsel
