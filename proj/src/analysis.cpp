#include "fairsel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace fairsel {

// ---------------------------------------------------------------------------
// Spearman

namespace {

bool nearly_equal(double a, double b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= kRankTieTolerance * scale;
}

Value pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && nearly_equal(v[order[j - 1]], v[order[j]])) ++j;
    // Positions i..j-1 (0-based) share the mean 1-based rank.
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = r;
    i = j;
  }
  return ranks;
}

Value spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 3) return std::nullopt;
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  return pearson(rx, ry);
}

Value spearman(std::span<const Value> x, std::span<const Value> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  std::vector<double> a, b;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] && y[i] && std::isfinite(*x[i]) && std::isfinite(*y[i])) {
      a.push_back(*x[i]);
      b.push_back(*y[i]);
    }
  }
  return spearman(std::span<const double>(a), std::span<const double>(b));
}

CorrelationMatrix correlation_matrix(const std::vector<SampleCell>& cells, std::span<const MetricId> ids,
                                     CorrelationScope scope) {
  CorrelationMatrix cm;
  cm.ids.assign(ids.begin(), ids.end());
  cm.scope = scope;
  const std::size_t m = ids.size();
  cm.rho.assign(m, std::vector<Value>(m));
  for (std::size_t i = 0; i < m; ++i) cm.rho[i][i] = 1.0;

  std::vector<const SampleCell*> used;
  for (const auto& c : cells) {
    const bool any = std::any_of(ids.begin(), ids.end(), [&](MetricId id) { return c.present[metric_index(id)]; });
    if (any) {
      used.push_back(&c);
      cm.cells.push_back(c.dataset + "/" + c.model);
    }
  }

  if (scope == CorrelationScope::pooled) {
    std::vector<std::vector<Value>> cols(m);
    for (const auto* c : used) {
      for (std::size_t k = 0; k < m; ++k) {
        const auto col = c->column(ids[k]);
        cols[k].insert(cols[k].end(), col.begin(), col.end());
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) cm.rho[i][j] = cm.rho[j][i] = spearman(cols[i], cols[j]);
    }
    return cm;
  }

  std::vector<std::vector<double>> sum(m, std::vector<double>(m, 0.0));
  std::vector<std::vector<int>> count(m, std::vector<int>(m, 0));
  for (const auto* c : used) {
    std::vector<std::vector<Value>> cols(m);
    for (std::size_t k = 0; k < m; ++k) cols[k] = c->column(ids[k]);
    for (std::size_t i = 0; i < m; ++i) {
      if (!c->present[metric_index(ids[i])]) continue;
      for (std::size_t j = i + 1; j < m; ++j) {
        if (!c->present[metric_index(ids[j])]) continue;
        if (const Value r = spearman(cols[i], cols[j])) {
          sum[i][j] += *r;
          ++count[i][j];
        }
      }
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (count[i][j] > 0) cm.rho[i][j] = cm.rho[j][i] = sum[i][j] / count[i][j];
    }
  }
  return cm;
}

double dissimilarity(Value sim) {
  if (!sim || !std::isfinite(*sim)) return 1.0;
  return 1.0 - std::abs(std::clamp(*sim, -1.0, 1.0));
}

Eigen::MatrixXd dissimilarity_matrix(const CorrelationMatrix& corr) {
  const auto m = static_cast<Eigen::Index>(corr.ids.size());
  Eigen::MatrixXd d(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      d(i, j) = i == j ? 0.0 : dissimilarity(corr.rho[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// UPGMA

Dendrogram agglomerate(const Eigen::MatrixXd& d) {
  if (d.rows() != d.cols()) throw std::invalid_argument("agglomerate: matrix must be square");
  const auto n = static_cast<int>(d.rows());
  for (int i = 0; i < n; ++i) {
    if (d(i, i) != 0.0) throw std::invalid_argument("agglomerate: diagonal must be zero");
    for (int j = i + 1; j < n; ++j) {
      if (!std::isfinite(d(i, j)) || std::abs(d(i, j) - d(j, i)) > 1e-12) {
        throw std::invalid_argument("agglomerate: matrix must be symmetric and finite");
      }
    }
  }

  Dendrogram dg;
  dg.n_leaves = n;
  if (n < 2) return dg;

  const int total = 2 * n - 1;
  std::vector<std::vector<double>> dist(static_cast<std::size_t>(total), std::vector<double>(total, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) dist[i][j] = d(i, j);
  }
  std::vector<int> size(static_cast<std::size_t>(total), 1);
  std::vector<int> active(static_cast<std::size_t>(n));
  std::iota(active.begin(), active.end(), 0);

  for (int step = 0; step < n - 1; ++step) {
    // `active` stays sorted, so the first strict minimum is the lexicographically smallest pair.
    std::size_t bi = 0, bj = 1;
    double best = dist[active[0]][active[1]];
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double v = dist[active[i]][active[j]];
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    const int a = active[bi];
    const int b = active[bj];
    const int id = n + step;
    size[id] = size[a] + size[b];
    for (int k : active) {
      if (k == a || k == b) continue;
      const double v = (size[a] * dist[a][k] + size[b] * dist[b][k]) / static_cast<double>(size[id]);
      dist[id][k] = dist[k][id] = v;
    }
    dg.merges.push_back(Merge{a, b, best, size[id]});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bi));
    active.push_back(id);
  }
  return dg;
}

double select_cut(const Dendrogram& dg) {
  if (dg.merges.empty()) throw std::invalid_argument("select_cut: dendrogram has no merges");
  std::vector<double> h;
  for (const auto& m : dg.merges) h.push_back(m.height);
  std::sort(h.begin(), h.end());
  h.push_back(std::max(1.0, h.back()));
  std::size_t best = 0;
  double best_gap = -1.0;
  for (std::size_t i = 0; i + 1 < h.size(); ++i) {
    const double gap = h[i + 1] - h[i];
    if (gap > best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return 0.5 * (h[best] + h[best + 1]);
}

std::vector<std::vector<int>> extract_clusters(const Dendrogram& dg, double cut) {
  const int n = dg.n_leaves;
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  // A representative leaf for every cluster id.
  std::vector<int> leaf_of(static_cast<std::size_t>(std::max(0, 2 * n - 1)));
  std::iota(leaf_of.begin(), leaf_of.begin() + n, 0);
  for (std::size_t k = 0; k < dg.merges.size(); ++k) {
    const auto& m = dg.merges[k];
    leaf_of[n + k] = leaf_of[m.left];
    if (m.height < cut) parent[find(leaf_of[m.left])] = find(leaf_of[m.right]);
  }
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<int>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

// ---------------------------------------------------------------------------
// Labels and percentages

namespace {

int percent_of(std::size_t part, std::size_t whole) {
  return static_cast<int>(std::lround(100.0 * static_cast<double>(part) / static_cast<double>(whole)));
}

}  // namespace

int agreement_percentage(std::span<const FairLabel> labels) {
  if (labels.empty()) throw std::invalid_argument("agreement_percentage: empty label list");
  const auto fair = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), FairLabel::fair));
  return percent_of(std::max(fair, labels.size() - fair), labels.size());
}

int unfair_percentage(std::span<const FairLabel> labels) {
  if (labels.empty()) throw std::invalid_argument("unfair_percentage: empty label list");
  return percent_of(static_cast<std::size_t>(std::count(labels.begin(), labels.end(), FairLabel::unfair)),
                    labels.size());
}

FairLabel majority_label(std::span<const FairLabel> labels) {
  const auto fair = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), FairLabel::fair));
  return 2 * fair > labels.size() ? FairLabel::fair : FairLabel::unfair;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty input");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::optional<double> median(std::span<const Value> values) {
  std::vector<double> v;
  for (const auto& x : values) {
    if (x && std::isfinite(*x)) v.push_back(*x);
  }
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

// ---------------------------------------------------------------------------
// Sensitivity

std::string_view sensitivity_name(Sensitivity s) {
  switch (s) {
    case Sensitivity::sensitive: return "sensitive";
    case Sensitivity::insensitive: return "insensitive";
    case Sensitivity::unknown: return "unknown";
  }
  return "unknown";
}

SensitivityReport sensitivity_table(const std::vector<SampleCell>& cells, double d, std::span<const MetricId> ids,
                                    std::size_t expected_samples) {
  SensitivityReport rep;
  rep.d = d;
  std::vector<double> iqrs;
  for (const auto& c : cells) {
    for (const MetricId id : ids) {
      if (!c.present[metric_index(id)]) continue;
      SensitivityCell sc;
      sc.dataset = c.dataset;
      sc.model = c.model;
      sc.metric = id;
      std::vector<double> v;
      for (const auto& x : c.column(id)) {
        if (x && std::isfinite(*x)) v.push_back(*x);
      }
      sc.samples = static_cast<int>(v.size());
      if (!v.empty()) {
        std::sort(v.begin(), v.end());
        sc.median = quantile_sorted(v, 0.5);
        sc.iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
        iqrs.push_back(*sc.iqr);
      }
      if (v.size() < expected_samples) {
        rep.warnings.push_back(c.dataset + "/" + c.model + "/" + std::string(metric_code(id)) + ": " +
                               std::to_string(v.size()) + " defined samples (expected " +
                               std::to_string(expected_samples) + ")");
      }
      rep.cells.push_back(std::move(sc));
    }
  }
  if (!iqrs.empty()) {
    const double mean = std::accumulate(iqrs.begin(), iqrs.end(), 0.0) / static_cast<double>(iqrs.size());
    double ss = 0.0;
    for (double q : iqrs) ss += (q - mean) * (q - mean);
    rep.sigma = std::sqrt(ss / static_cast<double>(iqrs.size()));
  }
  rep.threshold = d * rep.sigma;

  std::map<MetricId, std::pair<int, int>> tally;  // flagged, defined
  for (auto& sc : rep.cells) {
    if (!sc.iqr) continue;
    sc.flagged = *sc.iqr > rep.threshold;
    auto& [flagged, defined] = tally[sc.metric];
    flagged += sc.flagged ? 1 : 0;
    ++defined;
  }
  for (const MetricId id : ids) {
    const auto it = tally.find(id);
    if (it == tally.end() || it->second.second == 0) {
      rep.metric_verdicts[id] = Sensitivity::unknown;
    } else {
      rep.metric_verdicts[id] =
          2 * it->second.first < it->second.second ? Sensitivity::insensitive : Sensitivity::sensitive;
    }
  }
  return rep;
}

Sensitivity cluster_sensitivity(const SensitivityReport& report, std::span<const MetricId> cluster) {
  int insensitive = 0, known = 0;
  for (const MetricId id : cluster) {
    const auto it = report.metric_verdicts.find(id);
    if (it == report.metric_verdicts.end() || it->second == Sensitivity::unknown) continue;
    ++known;
    if (it->second == Sensitivity::insensitive) ++insensitive;
  }
  if (known == 0) return Sensitivity::unknown;
  return 2 * insensitive > static_cast<int>(cluster.size()) ? Sensitivity::insensitive : Sensitivity::sensitive;
}

// ---------------------------------------------------------------------------
// Movement

std::string_view movement_code(Movement m) {
  switch (m) {
    case Movement::toward_ideal: return "UF";
    case Movement::away_from_ideal: return "FU";
    case Movement::no_change: return "NC";
    case Movement::excluded: return "excluded";
  }
  return "excluded";
}

MovementCounts movement_counts(std::span<const Value> baseline, std::span<const Value> mitigated,
                               std::span<const int> ideals, double epsilon) {
  if (baseline.size() != mitigated.size() || baseline.size() != ideals.size()) {
    throw std::invalid_argument("movement_counts: inventories differ in size");
  }
  MovementCounts mc;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    if (!baseline[i] || !mitigated[i] || !std::isfinite(*baseline[i]) || !std::isfinite(*mitigated[i])) {
      ++mc.excluded;
      mc.per_metric.push_back(Movement::excluded);
      continue;
    }
    const double ideal = ideals[i];
    const double delta = std::abs(*mitigated[i] - ideal) - std::abs(*baseline[i] - ideal);
    Movement m = Movement::no_change;
    if (delta < -epsilon) {
      m = Movement::toward_ideal;
      ++mc.uf;
    } else if (delta > epsilon) {
      m = Movement::away_from_ideal;
      ++mc.fu;
    } else {
      ++mc.nc;
    }
    mc.per_metric.push_back(m);
  }
  return mc;
}

// ---------------------------------------------------------------------------
// Full analysis

namespace {

std::vector<std::string> dataset_names(const std::vector<SampleCell>& cells) {
  std::set<std::string> names;
  for (const auto& c : cells) names.insert(c.dataset);
  return {names.begin(), names.end()};
}

const SampleCell* labelling_cell(const std::vector<SampleCell>& cells, const std::string& dataset,
                                 const std::string& model) {
  const SampleCell* first = nullptr;
  for (const auto& c : cells) {
    if (c.dataset != dataset) continue;
    if (c.model == model) return &c;
    if (!first) first = &c;
  }
  return first;
}

}  // namespace

ClusterReport build_cluster_report(const std::vector<SampleCell>& cells, std::span<const MetricId> ids,
                                   const std::string& group, const SensitivityReport& sensitivity,
                                   const AnalysisConfig& config) {
  ClusterReport rep;
  rep.group = group;
  rep.correlation = correlation_matrix(cells, ids, config.scope);
  rep.dendrogram = agglomerate(dissimilarity_matrix(rep.correlation));
  rep.cut_height = rep.dendrogram.merges.empty() ? 1.0 : select_cut(rep.dendrogram);
  rep.datasets = dataset_names(cells);

  for (const auto& ds : rep.datasets) {
    const SampleCell* cell = labelling_cell(cells, ds, config.label_model);
    std::vector<FairLabel> all;
    for (const MetricId id : ids) {
      const Value med = cell ? median(cell->column(id)) : std::nullopt;
      const FairLabel l = label_fair(med, metric_def(id).ideal, config.thresholds);
      rep.medians[ds][id] = med;
      rep.labels[ds][id] = l;
      all.push_back(l);
    }
    if (!all.empty()) rep.unfair_percent[ds] = unfair_percentage(all);
  }
  if (!rep.unfair_percent.empty()) {
    std::vector<Value> pct;
    for (const auto& [ds, p] : rep.unfair_percent) pct.emplace_back(static_cast<double>(p));
    rep.median_unfair_percent = median(pct);
  }

  const auto parts = extract_clusters(rep.dendrogram, rep.cut_height);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    ClusterInfo info;
    info.id = static_cast<int>(k);
    for (int leaf : parts[k]) info.metrics.push_back(ids[static_cast<std::size_t>(leaf)]);

    // Representative: highest mean |rho| to the other members, earliest id on ties.
    double best = -1.0;
    for (int a : parts[k]) {
      double s = 0.0;
      for (int b : parts[k]) {
        if (a != b) s += 1.0 - dissimilarity(rep.correlation.rho[a][b]);
      }
      const double score = parts[k].size() > 1 ? s / static_cast<double>(parts[k].size() - 1) : 1.0;
      if (score > best) {
        best = score;
        info.representative = ids[static_cast<std::size_t>(a)];
      }
    }
    info.sensitivity = cluster_sensitivity(sensitivity, info.metrics);
    for (const auto& ds : rep.datasets) {
      std::vector<FairLabel> labels;
      for (const MetricId id : info.metrics) labels.push_back(rep.labels[ds][id]);
      info.agreement.push_back({ds, majority_label(labels), agreement_percentage(labels)});
    }
    rep.clusters.push_back(std::move(info));
  }
  return rep;
}

AnalysisResult analyze(const MetricSampleMatrix& samples, const AnalysisConfig& config) {
  AnalysisResult res;
  const auto cells = group_cells(samples);
  if (cells.empty()) throw std::invalid_argument("analyze: no samples");

  std::vector<MetricId> all_ids;
  for (const auto& d : metric_catalog()) all_ids.push_back(d.id);
  res.sensitivity = sensitivity_table(cells, config.sensitivity_d, all_ids);
  res.warnings = res.sensitivity.warnings;

  for (const auto& ds : dataset_names(cells)) {
    if (!labelling_cell(cells, ds, config.label_model) ||
        labelling_cell(cells, ds, config.label_model)->model != config.label_model) {
      res.warnings.push_back(ds + ": no '" + config.label_model + "' samples; labels use another model");
    }
  }

  const auto cls_ids = classification_metric_ids();
  const auto ds_ids = dataset_metric_ids();
  res.classification = build_cluster_report(cells, cls_ids, "classification", res.sensitivity, config);
  res.dataset = build_cluster_report(cells, ds_ids, "dataset", res.sensitivity, config);

  std::vector<int> ideals;
  for (const MetricId id : cls_ids) ideals.push_back(metric_def(id).ideal);
  for (const auto& base : cells) {
    if (base.model != "baseline") continue;
    for (const auto& other : cells) {
      if (other.dataset != base.dataset || other.model == base.model) continue;
      std::vector<Value> b, m;
      for (const MetricId id : cls_ids) {
        b.push_back(median(base.column(id)));
        m.push_back(median(other.column(id)));
      }
      res.movement.push_back({base.dataset, other.model, movement_counts(b, m, ideals, config.movement_epsilon)});
    }
  }
  return res;
}

}  // namespace fairsel
