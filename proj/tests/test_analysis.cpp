#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fairsel/analysis.hpp"
#include "fairsel/random.hpp"
#include "oracles.hpp"

using namespace fairsel;

TEST_CASE("fractional ranks average ties") {
  const std::vector<double> v{10, 20, 10, 30};
  CHECK(fractional_ranks(v) == std::vector<double>{1.5, 3, 1.5, 4});
  const std::vector<double> near{1.0, 1.0 + 1e-15, 2.0};
  CHECK(fractional_ranks(near) == std::vector<double>{1.5, 1.5, 3});
}

TEST_CASE("spearman worked values") {
  const std::vector<double> a{1, 2, 3}, b{3, 1, 2};
  CHECK(*spearman(std::span<const double>(a), std::span<const double>(b)) == doctest::Approx(-0.5));
  const std::vector<double> two{1, 2};
  CHECK_FALSE(spearman(std::span<const double>(two), std::span<const double>(two)).has_value());
  const std::vector<double> flat{1, 1, 1};
  CHECK_FALSE(spearman(std::span<const double>(a), std::span<const double>(flat)).has_value());

  const std::vector<Value> x{1.0, std::nullopt, 2.0, 3.0, 4.0};
  const std::vector<Value> y{2.0, 5.0, std::nullopt, 6.0, 8.0};
  CHECK(*spearman(std::span<const Value>(x), std::span<const Value>(y)) == doctest::Approx(1.0));
}

TEST_CASE("spearman equals rank-Pearson over all permutations") {
  for (std::size_t n = 3; n <= 6; ++n) {
    std::vector<double> base(n);
    std::iota(base.begin(), base.end(), 1.0);
    std::vector<double> perm = base;
    do {
      const double got = *spearman(std::span<const double>(base), std::span<const double>(perm));
      CHECK(got == oracle::rank_pearson(base, perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_CASE("spearman with ties matches the counting oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 3 + rng.below(8);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = static_cast<double>(rng.below(4));
    for (auto& v : y) v = static_cast<double>(rng.below(4));
    const auto got = spearman(std::span<const double>(x), std::span<const double>(y));
    if (!got) continue;
    CHECK(std::abs(*got - oracle::rank_pearson(x, y)) < 1e-12);
  }
}

TEST_CASE("mirrored metrics give |rho| = 1 exactly") {
  Rng rng(8);
  std::vector<double> x(25), y(25);
  for (std::size_t i = 0; i < 25; ++i) {
    x[i] = rng.uniform() * 0.2 - 0.3;
    y[i] = -x[i];
  }
  CHECK(*spearman(std::span<const double>(x), std::span<const double>(y)) == -1.0);
  CHECK(dissimilarity(-1.0) == 0.0);
  CHECK(dissimilarity(std::nullopt) == 1.0);
}

TEST_CASE("UPGMA worked example and cut") {
  Eigen::MatrixXd d(3, 3);
  d << 0, 0.1, 0.8, 0.1, 0, 0.9, 0.8, 0.9, 0;
  const auto dg = agglomerate(d);
  REQUIRE(dg.merges.size() == 2);
  CHECK(dg.merges[0].left == 0);
  CHECK(dg.merges[0].right == 1);
  CHECK(dg.merges[0].height == doctest::Approx(0.1));
  CHECK(dg.merges[1].height == doctest::Approx(0.85));
  CHECK(dg.merges[1].size == 3);
  // Heights 0.1, 0.85 plus the 1.0 sentinel: widest gap is 0.1 -> 0.85.
  CHECK(select_cut(dg) == doctest::Approx(0.475));
  CHECK(extract_clusters(dg, 0.475) == std::vector<std::vector<int>>{{0, 1}, {2}});
  CHECK(extract_clusters(dg, 0.05) == std::vector<std::vector<int>>{{0}, {1}, {2}});
  CHECK(extract_clusters(dg, 2.0) == std::vector<std::vector<int>>{{0, 1, 2}});
}

TEST_CASE("select_cut prefers the lowest of equal gaps") {
  Dendrogram dg;
  dg.n_leaves = 3;
  dg.merges = {{0, 1, 0.25, 2}, {2, 3, 0.625, 3}};
  // Gaps 0.375 and 0.375 (exact in binary): the lower one wins.
  CHECK(select_cut(dg) == 0.4375);
  CHECK_THROWS_AS(select_cut(Dendrogram{}), std::invalid_argument);
}

TEST_CASE("agglomerate input validation") {
  CHECK_THROWS_AS(agglomerate(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
  Eigen::MatrixXd asym(2, 2);
  asym << 0, 0.1, 0.2, 0;
  CHECK_THROWS_AS(agglomerate(asym), std::invalid_argument);
  Eigen::MatrixXd diag(2, 2);
  diag << 0.1, 0.1, 0.1, 0;
  CHECK_THROWS_AS(agglomerate(diag), std::invalid_argument);
  CHECK(agglomerate(Eigen::MatrixXd::Zero(1, 1)).merges.empty());
}

TEST_CASE("UPGMA equals the exhaustive oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(6));
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) d(i, j) = d(j, i) = rng.uniform();
    const auto dg = agglomerate(d);
    const auto ref = oracle::upgma(d);
    REQUIRE(dg.merges.size() == ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(dg.merges[k].height - ref[k].height) <= 1e-12);
  }
}

TEST_CASE("labels and percentages") {
  using L = FairLabel;
  const std::vector<L> a{L::unfair, L::unfair, L::fair};
  CHECK(agreement_percentage(a) == 67);
  CHECK(unfair_percentage(a) == 67);
  CHECK(majority_label(a) == L::unfair);
  const std::vector<L> tie{L::fair, L::unfair};
  CHECK(majority_label(tie) == L::unfair);
  CHECK(agreement_percentage(tie) == 50);
  CHECK_THROWS(agreement_percentage(std::vector<L>{}));
}

TEST_CASE("quantiles and medians") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile_sorted(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  const std::vector<Value> m{3.0, std::nullopt, 1.0, 2.0};
  CHECK(*median(m) == 2.0);
  CHECK_FALSE(median(std::vector<Value>{std::nullopt}).has_value());
}

namespace {

/// One cell per entry of `spreads`; metric C0 gets values spread evenly over [0, spread].
MetricSampleMatrix spread_matrix(const std::vector<double>& spreads) {
  MetricSampleMatrix m;
  for (std::size_t c = 0; c < spreads.size(); ++c) {
    for (int f = 0; f < 5; ++f) {
      m.records.push_back({"d" + std::to_string(c), "baseline", 0, f, MetricId::C0, spreads[c] * f / 4.0});
    }
  }
  return m;
}

}  // namespace

TEST_CASE("sensitivity threshold from the IQR population") {
  // IQRs are half the spread: 0.1 and 0.3, so sigma = 0.1.
  const auto cells = group_cells(spread_matrix({0.2, 0.6}));
  const std::vector<MetricId> ids{MetricId::C0};
  const auto rep = sensitivity_table(cells, 0.35, ids, 5);
  CHECK(rep.sigma == doctest::Approx(0.1));
  CHECK(rep.threshold == doctest::Approx(0.035));
  REQUIRE(rep.cells.size() == 2);
  CHECK(*rep.cells[0].iqr == doctest::Approx(0.1));
  CHECK(rep.cells[0].flagged);
  CHECK(rep.metric_verdicts.at(MetricId::C0) == Sensitivity::sensitive);

  const auto rep2 = sensitivity_table(group_cells(spread_matrix({0.2, 0.2, 0.2, 2.0})), 0.35, ids, 5);
  CHECK(rep2.metric_verdicts.at(MetricId::C0) == Sensitivity::insensitive);
  CHECK(cluster_sensitivity(rep2, ids) == Sensitivity::insensitive);
}

TEST_CASE("movement classification") {
  const std::vector<Value> base{0.3, 1.0, 0.2, std::nullopt, -0.2};
  const std::vector<Value> mit{0.1, 0.5, 0.2005, 0.1, 0.25};
  const std::vector<int> ideals{0, 1, 0, 0, 0};
  const auto mc = movement_counts(base, mit, ideals);
  CHECK(mc.per_metric == std::vector<Movement>{Movement::toward_ideal, Movement::away_from_ideal,
                                               Movement::no_change, Movement::excluded, Movement::away_from_ideal});
  CHECK(mc.uf == 1);
  CHECK(mc.fu == 2);
  CHECK(mc.nc == 1);
  CHECK(mc.excluded == 1);
  CHECK(movement_code(Movement::toward_ideal) == "UF");
}

namespace {

MetricSampleMatrix fake_samples(const std::vector<std::string>& datasets, const std::vector<std::string>& models) {
  Rng rng(31);
  MetricSampleMatrix m;
  for (const auto& ds : datasets) {
    for (const auto& model : models) {
      for (int r = 0; r < 5; ++r) {
        for (int f = 0; f < 5; ++f) {
          const double base = rng.uniform() - 0.5;
          for (const auto& def : metric_catalog()) {
            double v = rng.uniform();
            if (def.id == MetricId::C0) v = base;
            if (def.id == MetricId::C2) v = -base;
            if (def.id == MetricId::C16) v = base * base;
            if (def.id == MetricId::C20) v = 2 * std::abs(base);
            m.records.push_back({ds, model, r, f, def.id, v});
          }
        }
      }
    }
  }
  m.sort_canonical();
  return m;
}

bool together(const ClusterReport& rep, MetricId a, MetricId b) {
  for (const auto& c : rep.clusters) {
    const bool ha = std::find(c.metrics.begin(), c.metrics.end(), a) != c.metrics.end();
    const bool hb = std::find(c.metrics.begin(), c.metrics.end(), b) != c.metrics.end();
    if (ha || hb) return ha && hb;
  }
  return false;
}

}  // namespace

TEST_CASE("analyze keeps mirrored pairs together and separates the groups") {
  const auto res = analyze(fake_samples({"a", "b"}, {"baseline", "reweighing"}));
  CHECK(res.classification.correlation.ids.size() == 26);
  CHECK(res.dataset.correlation.ids.size() == 4);
  CHECK(together(res.classification, MetricId::C0, MetricId::C2));
  CHECK(together(res.classification, MetricId::C16, MetricId::C20));
  std::size_t total = 0;
  for (const auto& c : res.classification.clusters) total += c.metrics.size();
  CHECK(total == 26);
  CHECK(res.classification.unfair_percent.size() == 2);
  CHECK(res.movement.size() == 2);
  for (const auto& c : res.classification.clusters) CHECK(c.agreement.size() == 2);
}

TEST_CASE("single cell: averaged and pooled correlations agree") {
  const auto cells = group_cells(fake_samples({"a"}, {"baseline"}));
  const auto ids = classification_metric_ids();
  const auto avg = correlation_matrix(cells, ids, CorrelationScope::per_cell_average);
  const auto pooled = correlation_matrix(cells, ids, CorrelationScope::pooled);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < ids.size(); ++j) CHECK(avg.rho[i][j] == pooled.rho[i][j]);
}

TEST_CASE("analyze warns about missing cells but proceeds") {
  auto m = fake_samples({"a"}, {"baseline"});
  m.records.erase(std::remove_if(m.records.begin(), m.records.end(),
                                 [](const SampleRecord& r) { return r.metric == MetricId::C5 && r.fold == 0; }),
                  m.records.end());
  const auto res = analyze(m);
  CHECK_FALSE(res.warnings.empty());
  CHECK(res.classification.clusters.size() >= 1);
}
