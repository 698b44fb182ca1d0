#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "fairsel/dataset.hpp"

namespace fairsel {

/// A metric value; std::nullopt means Undefined (a zero denominator somewhere).
using Value = std::optional<double>;

// ---------------------------------------------------------------------------
// Catalog

enum class MetricId : int {
  C0, C1, C2, C3, C4, C5, C6, C7, C8, C9, C10, C11, C12,
  C13, C14, C15, C16, C17, C18, C19, C20, C21, C22, C23, C24, C25,
  D0, D1, D2, D3,
};

inline constexpr std::size_t kClassificationMetricCount = 26;
inline constexpr std::size_t kDatasetMetricCount = 4;
inline constexpr std::size_t kMetricCount = kClassificationMetricCount + kDatasetMetricCount;

enum class MetricFamily {
  misclassification,
  differential_fairness,
  individual_fairness,
  confusion_matrix_group,
  between_group_individual,
  intermediate,
  dataset,
};

struct MetricDef {
  MetricId id;
  std::string_view code;  // "C0" .. "D3"
  std::string_view name;  // e.g. "true_positive_rate_difference"
  int ideal;              // 0 or 1
  MetricFamily family;
};

const std::array<MetricDef, kMetricCount>& metric_catalog();
const MetricDef& metric_def(MetricId id);
std::string_view metric_code(MetricId id);
std::string_view family_name(MetricFamily f);
/// Throws std::invalid_argument for an unknown code.
MetricId parse_metric_id(std::string_view code);
inline std::size_t metric_index(MetricId id) { return static_cast<std::size_t>(id); }
inline bool is_classification_metric(MetricId id) { return metric_index(id) < kClassificationMetricCount; }

std::vector<MetricId> classification_metric_ids();
std::vector<MetricId> dataset_metric_ids();

/// [{id, name, ideal, family}, ...] in catalog order.
nlohmann::json metric_catalog_json();

struct MetricValue {
  MetricId id;
  Value value;
};

// ---------------------------------------------------------------------------
// Confusion-matrix rates

struct RateSet {
  Value tpr, fpr, fnr, tnr;
  Value for_, fdr, ppv, npv;
  Value err, selection_rate;
};

RateSet confusion_rates(const ConfusionMass& cm);
RateSet confusion_rates(const ConfusionCounts& cm);

enum class RateKind { TPR, FPR, FNR, TNR, FOR, FDR, PPV, NPV, ERR, selection_rate };
enum class DisparityMode { difference, ratio };

/// Throws std::invalid_argument for an unrecognized name.
RateKind parse_rate_kind(std::string_view name);
Value rate_of(const RateSet& r, RateKind kind);

/// unprivileged - privileged, or unprivileged / privileged. Only TPR, FPR, FNR,
/// FOR, FDR and ERR are accepted; other kinds throw std::invalid_argument.
Value disparity(RateKind kind, DisparityMode mode, const RateSet& unpriv, const RateSet& priv);

/// C9 (absolute = false) or C10 (absolute = true).
Value average_odds(const RateSet& unpriv, const RateSet& priv, bool absolute);

Value statistical_parity(Value sel_unpriv, Value sel_priv, DisparityMode mode);

// ---------------------------------------------------------------------------
// Benefit-based inequality indices

struct BenefitVector {
  std::vector<double> b;
  double mean = 0.0;

  static BenefitVector from_values(std::vector<double> b);
};

/// b_i = yhat_i - y_i + 1. Throws std::invalid_argument on empty or mismatched input.
BenefitVector benefit_vector(std::span<const int> y_true, std::span<const int> y_pred);

/// Undefined when the mean benefit is 0 or the result is not finite.
/// alpha == 1 gives the Theil index, alpha == 0 the mean log deviation.
Value generalized_entropy_index(const BenefitVector& b, double alpha = 2.0);
Value theil_index(const BenefitVector& b);
/// 2 * sqrt(GE(alpha = 2)).
Value coefficient_of_variation(const BenefitVector& b);

enum class GroupScope { two_group, all_groups };

/// Replaces every b_i by its group's mean benefit. With a single binary
/// protected attribute both scopes produce the same vector.
BenefitVector between_group_benefits(const BenefitVector& b, std::span<const int> groups,
                                     GroupScope scope = GroupScope::two_group);

// ---------------------------------------------------------------------------
// Differential fairness

/// Max over group pairs of the absolute log-ratio of Dirichlet-smoothed
/// favorable rates and of their complements. Undefined with fewer than two groups.
Value smoothed_edf(std::span<const double> pos_counts, std::span<const double> totals,
                   double concentration = 1.0);

Value bias_amplification(Value edf_classifier, Value edf_dataset);

// ---------------------------------------------------------------------------
// Consistency (kNN)

/// 1 - mean_i |y_i - mean(y over the k nearest neighbours of i)|, Euclidean
/// distance, self excluded, ties by row index. Throws if rows <= k or k < 1.
double consistency(const Eigen::MatrixXd& X, std::span<const int> y, int k = 5);

// ---------------------------------------------------------------------------
// Metric suites

struct MetricOptions {
  double alpha = 2.0;
  double concentration = 1.0;
  int k_neighbors = 5;
};

/// C0..C25 in catalog order. A single-group input makes every group metric
/// Undefined; C13, C16, C19 and C20 are still computed.
std::array<MetricValue, kClassificationMetricCount> compute_classification_metrics(
    std::span<const int> y_true, std::span<const int> y_pred, std::span<const int> s,
    const MetricOptions& opts = {});

/// D0..D3. Weights (empty = unit) enter D1..D3 as weighted rate estimates.
std::array<MetricValue, kDatasetMetricCount> compute_dataset_metrics(std::span<const int> y, std::span<const int> s,
                                                                     const Eigen::MatrixXd& X,
                                                                     std::span<const double> weights = {},
                                                                     const MetricOptions& opts = {});

/// D1..D3 only; lets callers reuse one consistency pass across weightings.
std::array<MetricValue, 3> dataset_rate_metrics(std::span<const int> y, std::span<const int> s,
                                                std::span<const double> weights, double concentration = 1.0);

// ---------------------------------------------------------------------------
// Fair / unfair labelling

enum class FairLabel { fair, unfair };

struct FairThresholds {
  double zero_band = 0.1;  // ideal 0: fair iff -zero_band <= v <= zero_band
  double one_low = 0.8;    // ideal 1: fair iff one_low <= v <= one_high
  double one_high = 1.2;
};

/// Bounds are inclusive; Undefined is Unfair.
FairLabel label_fair(Value v, int ideal, const FairThresholds& t = {});
std::string_view label_name(FairLabel l);

}  // namespace fairsel
