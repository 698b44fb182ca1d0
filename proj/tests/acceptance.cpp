// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fairsel/analysis.hpp"
#include "fairsel/csv.hpp"
#include "fairsel/harness.hpp"
#include "fairsel/metrics.hpp"
#include "fairsel/models.hpp"
#include "fairsel/pipeline.hpp"
#include "fairsel/random.hpp"
#include "fairsel/report.hpp"
#include "fairsel/synthetic.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fairsel;

namespace {

struct Outcome {
  bool pass = true;
  bool skipped = false;
  std::string detail;
};

struct Check {
  Outcome* out;
  int failures = 0;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures++ < 3) out->detail += (out->detail.empty() ? "" : "; ") + what;
    out->pass = false;
  }
};

Value at(const std::array<MetricValue, kClassificationMetricCount>& m, MetricId id) {
  return m[metric_index(id)].value;
}

bool close(Value a, Value b, double tol) { return a && b && std::abs(*a - *b) <= tol; }

Outcome metric_identities() {
  Outcome o;
  Check c{&o};
  Rng rng(2024);
  int checked = 0;
  while (checked < 1000) {
    const std::size_t n = 4 + rng.below(40);
    auto y = oracle::random_bits(rng, n, 0.2 + 0.6 * rng.uniform());
    auto p = oracle::random_bits(rng, n, 0.2 + 0.6 * rng.uniform());
    auto s = oracle::random_bits(rng, n);
    if (std::count(s.begin(), s.end(), 1) == 0 || std::count(s.begin(), s.end(), 0) == 0) continue;
    ++checked;
    const auto m = compute_classification_metrics(y, p, s);
    const auto truth = compute_classification_metrics(y, y, s);
    const auto d = dataset_rate_metrics(y, s, {});
    if (at(m, MetricId::C0)) c.expect(close(at(m, MetricId::C2), -*at(m, MetricId::C0), 1e-12), "C2 != -C0");
    if (at(m, MetricId::C16)) {
      c.expect(close(at(m, MetricId::C20), 2 * std::sqrt(*at(m, MetricId::C16)), 1e-12), "C20 != 2 sqrt C16");
    }
    const auto ru = confusion_rates(build_grouped_confusion(y, p, s).unprivileged);
    const auto rp = confusion_rates(build_grouped_confusion(y, p, s).privileged);
    if (ru.fpr && rp.fpr && ru.tpr && rp.tpr) {
      const double expect_c9 = 0.5 * ((*ru.fpr - *rp.fpr) + (*ru.tpr - *rp.tpr));
      c.expect(close(at(m, MetricId::C9), expect_c9, 1e-12), "C9 != mean of deltas");
      c.expect(*at(m, MetricId::C10) >= std::abs(*at(m, MetricId::C9)) - 1e-12, "C10 < |C9|");
    }
    if (d[1].value) c.expect(close(at(truth, MetricId::C15), d[1].value, 1e-12), "C15(y) != D2");
    if (d[2].value) c.expect(close(at(truth, MetricId::C14), d[2].value, 1e-12), "C14(y) != D3");
  }
  o.detail = o.detail.empty() ? "1000 instances" : o.detail;
  return o;
}

Outcome reweighing_exactness() {
  Outcome o;
  Check c{&o};
  Rng rng(77);
  int done = 0;
  double worst = 0;
  while (done < 100) {
    const std::size_t n = 8 + rng.below(200);
    auto y = oracle::random_bits(rng, n, 0.1 + 0.8 * rng.uniform());
    auto s = oracle::random_bits(rng, n, 0.1 + 0.8 * rng.uniform());
    int cells[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < n; ++i) ++cells[s[i]][y[i]];
    if (!cells[0][0] || !cells[0][1] || !cells[1][0] || !cells[1][1]) continue;
    ++done;
    const auto w = reweigh(y, s).apply(y, s);
    const auto d = dataset_rate_metrics(y, s, w);
    worst = std::max({worst, std::abs(*d[1].value), std::abs(*d[2].value - 1.0)});
    c.expect(std::abs(*d[1].value) <= 1e-9, "weighted D2 != 0");
    c.expect(std::abs(*d[2].value - 1.0) <= 1e-9, "weighted D3 != 1");
  }
  if (o.pass) o.detail = "100 datasets, worst deviation " + format_double(worst);
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  Check c{&o};
  int perms = 0;
  for (std::size_t n = 3; n <= 6; ++n) {
    std::vector<double> base(n);
    std::iota(base.begin(), base.end(), 1.0);
    std::vector<double> perm = base;
    do {
      ++perms;
      const auto got = spearman(std::span<const double>(base), std::span<const double>(perm));
      c.expect(got && *got == oracle::rank_pearson(base, perm), "spearman differs from rank-Pearson");
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  Rng rng(6);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j) d(i, j) = d(j, i) = rng.uniform();
    const auto dg = agglomerate(d);
    const auto ref = oracle::upgma(d);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      worst = std::max(worst, std::abs(dg.merges[k].height - ref[k].height));
      c.expect(std::abs(dg.merges[k].height - ref[k].height) <= 1e-12, "UPGMA height mismatch");
    }
  }
  if (o.pass) o.detail = std::to_string(perms) + " permutations, 100 UPGMA trials, worst height diff " +
                         format_double(worst);
  return o;
}

/// Height at which leaves a and b first share a cluster.
double join_height(const Dendrogram& dg, int a, int b) {
  std::vector<std::vector<int>> members(static_cast<std::size_t>(2 * dg.n_leaves));
  for (int i = 0; i < dg.n_leaves; ++i) members[i] = {i};
  for (std::size_t k = 0; k < dg.merges.size(); ++k) {
    const auto& m = dg.merges[k];
    auto& dst = members[static_cast<std::size_t>(dg.n_leaves) + k];
    dst = members[m.left];
    dst.insert(dst.end(), members[m.right].begin(), members[m.right].end());
    if (std::count(dst.begin(), dst.end(), a) && std::count(dst.begin(), dst.end(), b)) return m.height;
  }
  return INFINITY;
}

Outcome co_clustering() {
  Outcome o;
  Check c{&o};
  std::vector<EncodedDataset> data;
  const std::pair<const char*, double> variants[] = {{"strong", 0.5}, {"mild", 0.15}, {"none", 0.0}};
  for (const auto& [name, bias] : variants) {
    SyntheticConfig sc;
    sc.name = name;
    sc.bias = bias;
    sc.rows = 600;
    sc.seed = 100 + static_cast<std::uint64_t>(bias * 100);
    data.push_back(encode_table(parse_csv(synthetic_csv(sc)), synthetic_spec(name)));
  }
  const auto res = run_experiment(data, ExperimentConfig{});
  for (const auto scope : {CorrelationScope::per_cell_average, CorrelationScope::pooled}) {
    AnalysisConfig cfg;
    cfg.scope = scope;
    const auto a = analyze(res.samples, cfg);
    const auto& dg = a.classification.dendrogram;
    for (const auto& [x, y] : {std::pair{MetricId::C0, MetricId::C2}, std::pair{MetricId::C16, MetricId::C20}}) {
      const double h = join_height(dg, static_cast<int>(metric_index(x)), static_cast<int>(metric_index(y)));
      c.expect(h == 0.0, std::string(metric_code(x)) + "/" + std::string(metric_code(y)) + " join at " +
                             format_double(h));
      for (const double cut : {1e-300, 1e-12, 0.01, a.classification.cut_height, 0.5, 1.0}) {
        bool same = false;
        for (const auto& part : extract_clusters(dg, cut)) {
          same = same || (std::count(part.begin(), part.end(), static_cast<int>(metric_index(x))) &&
                          std::count(part.begin(), part.end(), static_cast<int>(metric_index(y))));
        }
        c.expect(same, "pair split at cut " + format_double(cut));
      }
    }
  }
  if (o.pass) o.detail = "3 datasets x 2 models, both scopes, pairs join at height 0";
  return o;
}

Outcome gradient_check() {
  Outcome o;
  Check c{&o};
  Rng rng(55);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(49));
    const auto p = static_cast<Eigen::Index>(1 + rng.below(5));
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.uniform() * 4 - 2;
    const auto y = oracle::random_bits(rng, static_cast<std::size_t>(n));
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& v : w) v = 0.05 + rng.uniform() * 3;
    Eigen::VectorXd coef(p);
    for (Eigen::Index j = 0; j < p; ++j) coef[j] = rng.uniform() * 2 - 1;
    const double b0 = rng.uniform() - 0.5;
    const double l2 = rng.uniform() * 2;
    const auto g = logistic_gradient(X, y, w, coef, b0, l2);
    Eigen::VectorXd fd(p + 1);
    const double h = 1e-5;
    for (Eigen::Index k = 0; k <= p; ++k) {
      Eigen::VectorXd cp = coef, cm = coef;
      double bp = b0, bm = b0;
      if (k < p) {
        cp[k] += h;
        cm[k] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      fd[k] = (oracle::logistic_objective(X, y, w, cp, bp, l2) - oracle::logistic_objective(X, y, w, cm, bm, l2)) /
              (2 * h);
    }
    const double rel = (g - fd).norm() / std::max(1e-8, fd.norm());
    worst = std::max(worst, rel);
    c.expect(rel < 1e-4, "relative error " + format_double(rel));
  }
  if (o.pass) o.detail = "20 instances, worst relative error " + format_double(worst);
  return o;
}

Outcome entropy_checks() {
  Outcome o;
  Check c{&o};
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    std::vector<double> b(n);
    for (auto& v : b) v = static_cast<double>(rng.below(3));
    if (std::accumulate(b.begin(), b.end(), 0.0) == 0.0) b[rng.below(n)] = 1.0;
    const auto bv = BenefitVector::from_values(b);
    const auto ge2 = generalized_entropy_index(bv, 2.0);
    const auto th = theil_index(bv);
    c.expect(ge2 && std::abs(*ge2 - oracle::ge(b, 2.0)) <= 1e-12, "GE(2) differs from direct sum");
    c.expect(th && std::abs(*th - oracle::theil(b)) <= 1e-12, "Theil differs from direct sum");
    for (const double k : {0.5, 3.0}) {
      std::vector<double> scaled = b;
      for (auto& v : scaled) v *= k;
      const auto sv = BenefitVector::from_values(scaled);
      c.expect(std::abs(*generalized_entropy_index(sv, 2.0) - *ge2) <= 1e-12, "GE not scale invariant");
      c.expect(std::abs(*theil_index(sv) - *th) <= 1e-12, "Theil not scale invariant");
    }
  }
  const auto worked = BenefitVector::from_values({2.0, 0.0});
  c.expect(std::abs(*generalized_entropy_index(worked, 2.0) - 0.5) <= 1e-12, "GE([2,0]) != 0.5");
  c.expect(std::abs(*theil_index(worked) - std::log(2.0)) <= 1e-12, "Theil([2,0]) != ln 2");
  if (o.pass) o.detail = "500 vectors, scale factors 0.5 and 3, worked values";
  return o;
}

Outcome edf_worked() {
  Outcome o;
  // Hand derivation: smoothed rates (5 + 0.5) / 11 = 0.5 and (2 + 0.5) / 11 = 0.22727;
  // |ln(0.5 / 0.22727)| = ln 2.2 = 0.78846; complements give |ln(0.5 / 0.77273)| = 0.43532.
  const double fixture = 0.78846;
  const std::vector<double> pos{5, 2}, tot{10, 10};
  const auto v = smoothed_edf(pos, tot, 1.0);
  o.pass = v && std::abs(*v - 0.7885) <= 1e-3 && std::abs(*v - fixture) <= 1e-5;
  o.detail = v ? "EDF = " + format_double(*v) : "undefined";
  return o;
}

Outcome planted_bias() {
  Outcome o;
  Check c{&o};
  const auto dir = fs::temp_directory_path() / "fairsel_acceptance_demo";
  fs::remove_all(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto summary = run_demo(dir.string(), 1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(secs < 60.0, "demo took " + format_double(secs) + " s");
  c.expect(summary.runs.size() == 2, "expected two runs");
  if (summary.runs.size() == 2) {
    const auto& biased = summary.runs[0];
    const auto& control = summary.runs[1];
    c.expect(biased.c15_folds == 25 && biased.c15_unfair_folds >= 24,
             "biased C15 unfair in " + std::to_string(biased.c15_unfair_folds) + "/25");
    c.expect(control.c15_folds == 25 && control.c15_folds - control.c15_unfair_folds >= 24,
             "control C15 fair in " + std::to_string(control.c15_folds - control.c15_unfair_folds) + "/25");
    const int gap = biased.unfair_percent && control.unfair_percent
                        ? std::abs(*biased.unfair_percent - *control.unfair_percent)
                        : -1;
    c.expect(gap >= 20, "unfair-percentage gap " + std::to_string(gap));
    if (o.pass) {
      std::ostringstream d;
      d << "biased C15 unfair " << biased.c15_unfair_folds << "/25, control C15 fair "
        << control.c15_folds - control.c15_unfair_folds << "/25, unfair% " << *biased.unfair_percent << " vs "
        << *control.unfair_percent << ", " << std::fixed;
      d.precision(1);
      d << secs << " s";
      o.detail = d.str();
    }
  }
  fs::remove_all(dir);
  return o;
}

Outcome german_credit() {
  Outcome o;
  const char* path = std::getenv("FAIRSEL_GERMAN_CSV");
  if (!path || !fs::exists(path)) {
    o.skipped = true;
    o.detail = "FAIRSEL_GERMAN_CSV not set; see tools/prepare_german.py";
    return o;
  }
  Check c{&o};
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg;
  cfg.datasets.push_back({path, FAIRSEL_GERMAN_SPEC});
  const auto run = run_experiment_from_config(cfg);
  c.expect(!run.result.partial(), "experiment reported failures");
  const auto res = analyze(run.result.samples, cfg.analysis);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(secs < 120.0, "took " + format_double(secs) + " s");
  const auto k = res.classification.clusters.size();
  c.expect(res.classification.correlation.ids.size() == 26, "clustering is not 26-metric");
  c.expect(k >= 4 && k <= 10, std::to_string(k) + " clusters");
  std::string verdicts;
  for (const auto id : {MetricId::C17, MetricId::C18, MetricId::C21, MetricId::C23}) {
    const auto v = res.sensitivity.metric_verdicts.at(id);
    verdicts += std::string(metric_code(id)) + "=" + std::string(sensitivity_name(v)) + " ";
    c.expect(v == Sensitivity::insensitive, std::string(metric_code(id)) + " is " + std::string(sensitivity_name(v)));
  }
  std::ostringstream d;
  d.precision(1);
  d << std::fixed << k << " clusters, " << verdicts << secs << " s";
  o.detail = o.pass ? d.str() : o.detail + " (" + d.str() + ")";
  return o;
}

Outcome determinism() {
  Outcome o;
  Check c{&o};
  const auto dir = fs::temp_directory_path() / "fairsel_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<DatasetSource> sources;
  for (const auto& [name, bias] : {std::pair{"d1", 0.3}, std::pair{"d2", 0.05}}) {
    SyntheticConfig sc;
    sc.name = name;
    sc.bias = bias;
    sc.rows = 500;
    const auto csv = dir / (std::string(name) + ".csv");
    const auto spec = dir / (std::string(name) + ".json");
    std::ofstream(csv) << synthetic_csv(sc);
    std::ofstream(spec) << synthetic_spec(name).to_json().dump(2);
    sources.push_back({csv.string(), spec.string()});
  }
  std::vector<std::string> digests;
  for (const int jobs : {1, 4}) {
    RunConfig cfg;
    cfg.datasets = sources;
    cfg.experiment.jobs = jobs;
    const auto out = dir / ("jobs" + std::to_string(jobs));
    const auto run = run_experiment_from_config(cfg);
    write_experiment_outputs(out.string(), run);
    write_analysis_outputs(out.string(), read_results_file((out / "results.csv").string()), cfg.analysis);
    std::string d;
    for (const char* f : {"results.csv", "clusters.json", "report.md"}) {
      d += sha256_hex(read_text_file((out / f).string()));
    }
    digests.push_back(d);
  }
  c.expect(digests[0] == digests[1], "outputs differ between --jobs 1 and --jobs 4");
  if (o.pass) o.detail = "results.csv, clusters.json, report.md identical for jobs 1 and 4";
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double limit_s;  // 0 = no limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "metric identity suite", 5.0, metric_identities},
      {2, "reweighing exactness", 5.0, reweighing_exactness},
      {3, "oracle equivalence (spearman, UPGMA)", 0, oracle_equivalence},
      {4, "mirrored pairs co-cluster", 0, co_clustering},
      {5, "logistic gradient check", 0, gradient_check},
      {6, "entropy family checks", 0, entropy_checks},
      {7, "smoothed EDF worked example", 0, edf_worked},
      {8, "planted-bias end-to-end demo", 60.0, planted_bias},
      {9, "German Credit pipeline", 120.0, german_credit},
      {10, "determinism across --jobs", 0, determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.limit_s > 0 && secs >= cr.limit_s) {
      o.pass = false;
      o.detail += " [over " + format_double(cr.limit_s) + " s limit]";
    }
    const char* verdict = o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL");
    std::printf("criterion %2d: %s  %-40s %7.2f s  %s\n", cr.id, verdict, cr.title, secs, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
