#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "fairsel/csv.hpp"

namespace fairsel {

enum class FeatureKind { numeric, categorical };
enum class CategoricalEncoding { label_encode, one_hot };

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  CategoricalEncoding encoding = CategoricalEncoding::one_hot;
};

/// How to turn one CSV into (X, y, s). Values are matched as trimmed strings,
/// or numerically when both sides parse as numbers ("1" matches "1.0").
struct DatasetSpec {
  std::string name;
  std::string label_column;
  std::string favorable_value;
  std::string protected_column;
  std::string privileged_value;
  /// Empty means "every other column", kinds inferred from the data.
  std::vector<FeatureColumn> feature_columns;
  /// Appends s as the last feature column; the model sees the protected attribute.
  bool protected_as_feature = true;

  /// Throws ConfigError for missing fields or violated invariants.
  static DatasetSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

DatasetSpec parse_dataset_spec(std::string_view json_text);
DatasetSpec load_dataset_spec(const std::string& path);

/// Rows ready for modelling. y = 1 is favorable, s = 1 is privileged.
struct EncodedDataset {
  std::string name;
  Eigen::MatrixXd X;
  std::vector<int> y;
  std::vector<int> s;
  std::vector<double> weights;
  std::vector<std::string> feature_names;
  /// Data-row indices (0-based, header excluded) dropped for missing cells.
  std::vector<std::size_t> rejected_rows;

  std::size_t row_count() const { return y.size(); }
  std::size_t col_count() const { return static_cast<std::size_t>(X.cols()); }

  EncodedDataset subset(std::span<const std::size_t> rows) const;
};

/// Per-column min-max scaling. A constant column maps to 0. Values outside the
/// fitted range (test rows) are clipped into [0, 1].
class MinMaxScaler {
 public:
  static MinMaxScaler fit(const Eigen::MatrixXd& X);
  Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const;

  const Eigen::VectorXd& min() const { return min_; }
  const Eigen::VectorXd& max() const { return max_; }

 private:
  Eigen::VectorXd min_;
  Eigen::VectorXd max_;
};

/// Maps labels/protected values and encodes categoricals. X is left unscaled.
/// `excluded_columns` are never used as inferred features (e.g. a predictions column).
EncodedDataset encode_table(const CsvTable& table, const DatasetSpec& spec,
                            std::span<const std::string> excluded_columns = {});

/// encode_table followed by a global min-max normalization.
EncodedDataset load_dataset(std::string_view csv_text, const DatasetSpec& spec);
EncodedDataset load_dataset_file(const std::string& csv_path, const DatasetSpec& spec);

bool values_match(std::string_view raw, std::string_view target);
bool is_missing_cell(std::string_view cell);

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Confusion cells carrying summed instance weights instead of counts.
struct ConfusionMass {
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;
  double tn = 0.0;

  double total() const { return tp + fp + fn + tn; }
  static ConfusionMass from_counts(const ConfusionCounts& c);
};

struct GroupedConfusionMatrix {
  ConfusionCounts privileged;
  ConfusionCounts unprivileged;
  std::optional<ConfusionMass> weighted_privileged;
  std::optional<ConfusionMass> weighted_unprivileged;
};

/// Throws std::invalid_argument on length mismatch or non-binary entries,
/// GroupCoverageError when s holds a single group.
GroupedConfusionMatrix build_grouped_confusion(std::span<const int> y_true, std::span<const int> y_pred,
                                               std::span<const int> s,
                                               std::span<const double> weights = {});

}  // namespace fairsel
