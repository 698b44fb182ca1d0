#include "fairsel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

namespace fairsel {

// ---------------------------------------------------------------------------
// Catalog

const std::array<MetricDef, kMetricCount>& metric_catalog() {
  using F = MetricFamily;
  using M = MetricId;
  static const std::array<MetricDef, kMetricCount> catalog{{
      {M::C0, "C0", "true_positive_rate_difference", 0, F::confusion_matrix_group},
      {M::C1, "C1", "false_positive_rate_difference", 0, F::confusion_matrix_group},
      {M::C2, "C2", "false_negative_rate_difference", 0, F::confusion_matrix_group},
      {M::C3, "C3", "false_omission_rate_difference", 0, F::misclassification},
      {M::C4, "C4", "false_discovery_rate_difference", 0, F::misclassification},
      {M::C5, "C5", "false_positive_rate_ratio", 1, F::confusion_matrix_group},
      {M::C6, "C6", "false_negative_rate_ratio", 1, F::confusion_matrix_group},
      {M::C7, "C7", "false_omission_rate_ratio", 1, F::misclassification},
      {M::C8, "C8", "false_discovery_rate_ratio", 1, F::misclassification},
      {M::C9, "C9", "average_odds_difference", 0, F::confusion_matrix_group},
      {M::C10, "C10", "average_abs_odds_difference", 0, F::differential_fairness},
      {M::C11, "C11", "error_rate_difference", 0, F::misclassification},
      {M::C12, "C12", "error_rate_ratio", 1, F::misclassification},
      {M::C13, "C13", "selection_rate", 0, F::intermediate},
      {M::C14, "C14", "disparate_impact", 1, F::confusion_matrix_group},
      {M::C15, "C15", "statistical_parity_difference", 0, F::confusion_matrix_group},
      {M::C16, "C16", "generalized_entropy_index", 0, F::individual_fairness},
      {M::C17, "C17", "between_all_groups_generalized_entropy_index", 0, F::between_group_individual},
      {M::C18, "C18", "between_group_generalized_entropy_index", 0, F::between_group_individual},
      {M::C19, "C19", "theil_index", 0, F::individual_fairness},
      {M::C20, "C20", "coefficient_of_variation", 0, F::individual_fairness},
      {M::C21, "C21", "between_group_theil_index", 0, F::between_group_individual},
      {M::C22, "C22", "between_group_coefficient_of_variation", 0, F::between_group_individual},
      {M::C23, "C23", "between_all_groups_theil_index", 0, F::between_group_individual},
      {M::C24, "C24", "between_all_groups_coefficient_of_variation", 0, F::between_group_individual},
      {M::C25, "C25", "differential_fairness_bias_amplification", 0, F::differential_fairness},
      {M::D0, "D0", "consistency", 1, F::dataset},
      {M::D1, "D1", "smoothed_empirical_differential_fairness", 0, F::dataset},
      {M::D2, "D2", "mean_difference", 0, F::dataset},
      {M::D3, "D3", "disparate_impact", 1, F::dataset},
  }};
  return catalog;
}

const MetricDef& metric_def(MetricId id) { return metric_catalog()[metric_index(id)]; }

std::string_view metric_code(MetricId id) { return metric_def(id).code; }

std::string_view family_name(MetricFamily f) {
  switch (f) {
    case MetricFamily::misclassification: return "misclassification";
    case MetricFamily::differential_fairness: return "differential_fairness";
    case MetricFamily::individual_fairness: return "individual_fairness";
    case MetricFamily::confusion_matrix_group: return "confusion_matrix_group";
    case MetricFamily::between_group_individual: return "between_group_individual";
    case MetricFamily::intermediate: return "intermediate";
    case MetricFamily::dataset: return "dataset";
  }
  return "unknown";
}

MetricId parse_metric_id(std::string_view code) {
  for (const auto& d : metric_catalog()) {
    if (d.code == code) return d.id;
  }
  throw std::invalid_argument("unknown metric id: " + std::string(code));
}

std::vector<MetricId> classification_metric_ids() {
  std::vector<MetricId> ids;
  for (std::size_t i = 0; i < kClassificationMetricCount; ++i) ids.push_back(static_cast<MetricId>(i));
  return ids;
}

std::vector<MetricId> dataset_metric_ids() {
  std::vector<MetricId> ids;
  for (std::size_t i = kClassificationMetricCount; i < kMetricCount; ++i) ids.push_back(static_cast<MetricId>(i));
  return ids;
}

nlohmann::json metric_catalog_json() {
  auto arr = nlohmann::json::array();
  for (const auto& d : metric_catalog()) {
    arr.push_back({{"id", d.code}, {"name", d.name}, {"ideal", d.ideal}, {"family", family_name(d.family)}});
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Rates

namespace {

Value safe_div(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

Value sub(Value a, Value b) {
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

Value div(Value a, Value b) {
  if (!a || !b || *b == 0.0) return std::nullopt;
  return *a / *b;
}

}  // namespace

RateSet confusion_rates(const ConfusionMass& c) {
  RateSet r;
  r.tpr = safe_div(c.tp, c.tp + c.fn);
  r.fnr = safe_div(c.fn, c.tp + c.fn);
  r.fpr = safe_div(c.fp, c.fp + c.tn);
  r.tnr = safe_div(c.tn, c.fp + c.tn);
  r.for_ = safe_div(c.fn, c.fn + c.tn);
  r.npv = safe_div(c.tn, c.fn + c.tn);
  r.fdr = safe_div(c.fp, c.tp + c.fp);
  r.ppv = safe_div(c.tp, c.tp + c.fp);
  r.err = safe_div(c.fp + c.fn, c.total());
  r.selection_rate = safe_div(c.tp + c.fp, c.total());
  return r;
}

RateSet confusion_rates(const ConfusionCounts& c) { return confusion_rates(ConfusionMass::from_counts(c)); }

RateKind parse_rate_kind(std::string_view name) {
  static const std::map<std::string_view, RateKind> kinds{
      {"TPR", RateKind::TPR}, {"FPR", RateKind::FPR}, {"FNR", RateKind::FNR},
      {"TNR", RateKind::TNR}, {"FOR", RateKind::FOR}, {"FDR", RateKind::FDR},
      {"PPV", RateKind::PPV}, {"NPV", RateKind::NPV}, {"ERR", RateKind::ERR},
      {"selection_rate", RateKind::selection_rate},
  };
  const auto it = kinds.find(name);
  if (it == kinds.end()) throw std::invalid_argument("unknown rate kind: " + std::string(name));
  return it->second;
}

Value rate_of(const RateSet& r, RateKind kind) {
  switch (kind) {
    case RateKind::TPR: return r.tpr;
    case RateKind::FPR: return r.fpr;
    case RateKind::FNR: return r.fnr;
    case RateKind::TNR: return r.tnr;
    case RateKind::FOR: return r.for_;
    case RateKind::FDR: return r.fdr;
    case RateKind::PPV: return r.ppv;
    case RateKind::NPV: return r.npv;
    case RateKind::ERR: return r.err;
    case RateKind::selection_rate: return r.selection_rate;
  }
  return std::nullopt;
}

Value disparity(RateKind kind, DisparityMode mode, const RateSet& unpriv, const RateSet& priv) {
  switch (kind) {
    case RateKind::TPR:
    case RateKind::FPR:
    case RateKind::FNR:
    case RateKind::FOR:
    case RateKind::FDR:
    case RateKind::ERR:
      break;
    default:
      throw std::invalid_argument("disparity: rate kind has no disparity metric");
  }
  const Value u = rate_of(unpriv, kind);
  const Value p = rate_of(priv, kind);
  return mode == DisparityMode::difference ? sub(u, p) : div(u, p);
}

Value average_odds(const RateSet& unpriv, const RateSet& priv, bool absolute) {
  const Value dfpr = sub(unpriv.fpr, priv.fpr);
  const Value dtpr = sub(unpriv.tpr, priv.tpr);
  if (!dfpr || !dtpr) return std::nullopt;
  if (absolute) return 0.5 * (std::abs(*dfpr) + std::abs(*dtpr));
  return 0.5 * (*dfpr + *dtpr);
}

Value statistical_parity(Value sel_unpriv, Value sel_priv, DisparityMode mode) {
  return mode == DisparityMode::difference ? sub(sel_unpriv, sel_priv) : div(sel_unpriv, sel_priv);
}

// ---------------------------------------------------------------------------
// Benefits

BenefitVector BenefitVector::from_values(std::vector<double> values) {
  BenefitVector bv;
  bv.b = std::move(values);
  double sum = 0.0;
  for (double v : bv.b) sum += v;
  bv.mean = bv.b.empty() ? 0.0 : sum / static_cast<double>(bv.b.size());
  return bv;
}

BenefitVector benefit_vector(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.empty()) throw std::invalid_argument("benefit_vector: empty input");
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("benefit_vector: length mismatch");
  std::vector<double> b(y_true.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<double>(y_pred[i] - y_true[i] + 1);
  return BenefitVector::from_values(std::move(b));
}

Value theil_index(const BenefitVector& bv) {
  if (bv.b.empty() || !(bv.mean > 0.0)) return std::nullopt;
  double sum = 0.0;
  for (double v : bv.b) {
    const double r = v / bv.mean;
    if (r > 0.0) sum += r * std::log(r);  // 0 * ln 0 = 0
  }
  const double out = sum / static_cast<double>(bv.b.size());
  if (!std::isfinite(out)) return std::nullopt;
  return out;
}

Value generalized_entropy_index(const BenefitVector& bv, double alpha) {
  if (bv.b.empty() || !(bv.mean > 0.0)) return std::nullopt;
  const double n = static_cast<double>(bv.b.size());
  if (alpha == 1.0) return theil_index(bv);
  double out = 0.0;
  if (alpha == 0.0) {
    double sum = 0.0;
    for (double v : bv.b) sum += std::log(v / bv.mean);
    out = -sum / n;
  } else {
    double sum = 0.0;
    for (double v : bv.b) sum += std::pow(v / bv.mean, alpha) - 1.0;
    out = sum / (n * alpha * (alpha - 1.0));
  }
  if (!std::isfinite(out)) return std::nullopt;
  return out;
}

Value coefficient_of_variation(const BenefitVector& bv) {
  const Value ge = generalized_entropy_index(bv, 2.0);
  if (!ge) return std::nullopt;
  return 2.0 * std::sqrt(std::max(*ge, 0.0));
}

BenefitVector between_group_benefits(const BenefitVector& bv, std::span<const int> groups, GroupScope) {
  if (groups.size() != bv.b.size()) throw std::invalid_argument("between_group_benefits: length mismatch");
  // One protected attribute: the intersectional groups are the attribute's values.
  std::map<int, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto& [sum, count] = acc[groups[i]];
    sum += bv.b[i];
    ++count;
  }
  std::vector<double> out(bv.b.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& [sum, count] = acc.at(groups[i]);
    out[i] = sum / static_cast<double>(count);
  }
  return BenefitVector::from_values(std::move(out));
}

// ---------------------------------------------------------------------------
// Differential fairness

Value smoothed_edf(std::span<const double> pos_counts, std::span<const double> totals, double concentration) {
  if (pos_counts.size() != totals.size()) throw std::invalid_argument("smoothed_edf: length mismatch");
  if (!(concentration > 0.0)) throw std::invalid_argument("smoothed_edf: concentration must be positive");
  std::vector<double> rates;
  for (std::size_t g = 0; g < totals.size(); ++g) {
    if (!(totals[g] > 0.0)) continue;
    rates.push_back((pos_counts[g] + concentration / 2.0) / (totals[g] + concentration));
  }
  if (rates.size() < 2) return std::nullopt;
  double edf = 0.0;
  for (std::size_t g = 0; g < rates.size(); ++g) {
    for (std::size_t h = g + 1; h < rates.size(); ++h) {
      edf = std::max(edf, std::abs(std::log(rates[g] / rates[h])));
      edf = std::max(edf, std::abs(std::log((1.0 - rates[g]) / (1.0 - rates[h]))));
    }
  }
  return edf;
}

Value bias_amplification(Value edf_classifier, Value edf_dataset) { return sub(edf_classifier, edf_dataset); }

// ---------------------------------------------------------------------------
// Consistency

double consistency(const Eigen::MatrixXd& X, std::span<const int> y, int k) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (y.size() != n) throw std::invalid_argument("consistency: X rows and y length differ");
  if (k < 1) throw std::invalid_argument("consistency: k must be at least 1");
  if (n <= static_cast<std::size_t>(k)) throw std::invalid_argument("consistency: need more rows than neighbours");

  const auto kk = static_cast<std::size_t>(k);
  std::vector<std::pair<double, std::size_t>> dist(n - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dist[m++] = {(X.row(static_cast<Eigen::Index>(i)) - X.row(static_cast<Eigen::Index>(j))).squaredNorm(), j};
    }
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk - 1), dist.end());
    double neighbour_sum = 0.0;
    for (std::size_t t = 0; t < kk; ++t) neighbour_sum += y[dist[t].second];
    total += std::abs(static_cast<double>(y[i]) - neighbour_sum / static_cast<double>(kk));
  }
  return 1.0 - total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Suites

namespace {

void check_binary(std::span<const int> v, const char* what) {
  for (int x : v) {
    if (x != 0 && x != 1) throw std::invalid_argument(std::string(what) + ": entries must be 0 or 1");
  }
}

struct GroupTally {
  double pos[2] = {0.0, 0.0};
  double total[2] = {0.0, 0.0};
};

GroupTally tally(std::span<const int> labels, std::span<const int> s, std::span<const double> weights) {
  GroupTally t;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    t.total[s[i]] += w;
    if (labels[i] == 1) t.pos[s[i]] += w;
  }
  return t;
}

// Index 0 is unprivileged, 1 privileged.
Value group_rate(const GroupTally& t, int g) { return safe_div(t.pos[g], t.total[g]); }

}  // namespace

std::array<MetricValue, kClassificationMetricCount> compute_classification_metrics(std::span<const int> y_true,
                                                                                   std::span<const int> y_pred,
                                                                                   std::span<const int> s,
                                                                                   const MetricOptions& opts) {
  if (y_true.size() != y_pred.size() || y_true.size() != s.size()) {
    throw std::invalid_argument("compute_classification_metrics: length mismatch");
  }
  if (y_true.empty()) throw std::invalid_argument("compute_classification_metrics: empty input");
  check_binary(y_true, "y_true");
  check_binary(y_pred, "y_pred");
  check_binary(s, "s");

  std::array<MetricValue, kClassificationMetricCount> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<MetricId>(i);
  auto set = [&](MetricId id, Value v) { out[metric_index(id)].value = v; };

  ConfusionCounts overall, priv, unpriv;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ConfusionCounts& c = s[i] == 1 ? priv : unpriv;
    for (ConfusionCounts* target : {&c, &overall}) {
      if (y_true[i] == 1) {
        (y_pred[i] == 1 ? target->tp : target->fn)++;
      } else {
        (y_pred[i] == 1 ? target->fp : target->tn)++;
      }
    }
  }
  const bool both_groups = priv.total() > 0 && unpriv.total() > 0;

  set(MetricId::C13, confusion_rates(overall).selection_rate);
  const BenefitVector b = benefit_vector(y_true, y_pred);
  set(MetricId::C16, generalized_entropy_index(b, opts.alpha));
  set(MetricId::C19, theil_index(b));
  set(MetricId::C20, coefficient_of_variation(b));
  if (!both_groups) return out;

  using K = RateKind;
  using D = DisparityMode;
  const RateSet ru = confusion_rates(unpriv);
  const RateSet rp = confusion_rates(priv);
  set(MetricId::C0, disparity(K::TPR, D::difference, ru, rp));
  set(MetricId::C1, disparity(K::FPR, D::difference, ru, rp));
  set(MetricId::C2, disparity(K::FNR, D::difference, ru, rp));
  set(MetricId::C3, disparity(K::FOR, D::difference, ru, rp));
  set(MetricId::C4, disparity(K::FDR, D::difference, ru, rp));
  set(MetricId::C5, disparity(K::FPR, D::ratio, ru, rp));
  set(MetricId::C6, disparity(K::FNR, D::ratio, ru, rp));
  set(MetricId::C7, disparity(K::FOR, D::ratio, ru, rp));
  set(MetricId::C8, disparity(K::FDR, D::ratio, ru, rp));
  set(MetricId::C9, average_odds(ru, rp, false));
  set(MetricId::C10, average_odds(ru, rp, true));
  set(MetricId::C11, disparity(K::ERR, D::difference, ru, rp));
  set(MetricId::C12, disparity(K::ERR, D::ratio, ru, rp));
  set(MetricId::C14, statistical_parity(ru.selection_rate, rp.selection_rate, D::ratio));
  set(MetricId::C15, statistical_parity(ru.selection_rate, rp.selection_rate, D::difference));

  const BenefitVector all_groups = between_group_benefits(b, s, GroupScope::all_groups);
  const BenefitVector two_group = between_group_benefits(b, s, GroupScope::two_group);
  set(MetricId::C17, generalized_entropy_index(all_groups, opts.alpha));
  set(MetricId::C18, generalized_entropy_index(two_group, opts.alpha));
  set(MetricId::C21, theil_index(two_group));
  set(MetricId::C22, coefficient_of_variation(two_group));
  set(MetricId::C23, theil_index(all_groups));
  set(MetricId::C24, coefficient_of_variation(all_groups));

  const GroupTally pred = tally(y_pred, s, {});
  const GroupTally truth = tally(y_true, s, {});
  const Value edf_pred = smoothed_edf(pred.pos, pred.total, opts.concentration);
  const Value edf_true = smoothed_edf(truth.pos, truth.total, opts.concentration);
  set(MetricId::C25, bias_amplification(edf_pred, edf_true));
  return out;
}

std::array<MetricValue, 3> dataset_rate_metrics(std::span<const int> y, std::span<const int> s,
                                                std::span<const double> weights, double concentration) {
  const GroupTally t = tally(y, s, weights);
  const Value ru = group_rate(t, 0);
  const Value rp = group_rate(t, 1);
  return {{
      {MetricId::D1, smoothed_edf(t.pos, t.total, concentration)},
      {MetricId::D2, statistical_parity(ru, rp, DisparityMode::difference)},
      {MetricId::D3, statistical_parity(ru, rp, DisparityMode::ratio)},
  }};
}

std::array<MetricValue, kDatasetMetricCount> compute_dataset_metrics(std::span<const int> y, std::span<const int> s,
                                                                     const Eigen::MatrixXd& X,
                                                                     std::span<const double> weights,
                                                                     const MetricOptions& opts) {
  if (y.size() != s.size() || static_cast<Eigen::Index>(y.size()) != X.rows()) {
    throw std::invalid_argument("compute_dataset_metrics: length mismatch");
  }
  if (!weights.empty() && weights.size() != y.size()) {
    throw std::invalid_argument("compute_dataset_metrics: weights length mismatch");
  }
  check_binary(y, "y");
  check_binary(s, "s");
  const auto rates = dataset_rate_metrics(y, s, weights, opts.concentration);
  return {{
      {MetricId::D0, consistency(X, y, opts.k_neighbors)},
      rates[0],
      rates[1],
      rates[2],
  }};
}

// ---------------------------------------------------------------------------
// Labels

FairLabel label_fair(Value v, int ideal, const FairThresholds& t) {
  if (!v || !std::isfinite(*v)) return FairLabel::unfair;
  if (ideal == 0) return (*v >= -t.zero_band && *v <= t.zero_band) ? FairLabel::fair : FairLabel::unfair;
  return (*v >= t.one_low && *v <= t.one_high) ? FairLabel::fair : FairLabel::unfair;
}

std::string_view label_name(FairLabel l) { return l == FairLabel::fair ? "Fair" : "Unfair"; }

}  // namespace fairsel
