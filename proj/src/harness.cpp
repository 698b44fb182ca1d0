#include "fairsel/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "fairsel/csv.hpp"
#include "fairsel/error.hpp"
#include "fairsel/random.hpp"

namespace fairsel {

// ---------------------------------------------------------------------------
// CV plan

std::vector<std::size_t> CvPlan::test_rows(std::size_t repeat, int fold) const {
  std::vector<std::size_t> rows;
  const auto& a = assignments.at(repeat);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == fold) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> CvPlan::train_rows(std::size_t repeat, int fold) const {
  std::vector<std::size_t> rows;
  const auto& a = assignments.at(repeat);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != fold) rows.push_back(i);
  }
  return rows;
}

CvPlan make_cv_plan(std::size_t n_rows, std::span<const std::uint64_t> seeds, int n_folds) {
  if (n_folds < 2) throw std::invalid_argument("make_cv_plan: need at least 2 folds");
  if (n_rows < 2 * static_cast<std::size_t>(n_folds)) {
    throw std::invalid_argument("make_cv_plan: need at least " + std::to_string(2 * n_folds) + " rows, got " +
                                std::to_string(n_rows));
  }
  if (seeds.empty()) throw std::invalid_argument("make_cv_plan: no seeds");

  CvPlan plan;
  plan.n_folds = n_folds;
  plan.seeds.assign(seeds.begin(), seeds.end());
  const auto k = static_cast<std::size_t>(n_folds);
  for (const auto seed : seeds) {
    std::vector<std::size_t> order(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    // Contiguous chunks of the permutation; the first n % k folds get one extra row.
    std::vector<int> assignment(n_rows);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t size = n_rows / k + (f < n_rows % k ? 1 : 0);
      for (std::size_t t = 0; t < size; ++t) assignment[order[pos++]] = static_cast<int>(f);
    }
    plan.assignments.push_back(std::move(assignment));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Sample matrix

void MetricSampleMatrix::sort_canonical() {
  std::stable_sort(records.begin(), records.end(), [](const SampleRecord& a, const SampleRecord& b) {
    return std::tie(a.dataset, a.model, a.repeat, a.fold, a.metric) <
           std::tie(b.dataset, b.model, b.repeat, b.fold, b.metric);
  });
}

std::vector<Value> SampleCell::column(MetricId id) const {
  std::vector<Value> out;
  out.reserve(values.size());
  for (const auto& row : values) out.push_back(row[metric_index(id)]);
  return out;
}

std::vector<SampleCell> group_cells(const MetricSampleMatrix& samples) {
  std::map<std::pair<std::string, std::string>, std::map<std::pair<int, int>, std::size_t>> index;
  std::map<std::pair<std::string, std::string>, SampleCell> cells;
  for (const auto& r : samples.records) {
    const auto key = std::make_pair(r.dataset, r.model);
    auto& cell = cells[key];
    if (cell.dataset.empty() && cell.model.empty()) {
      cell.dataset = r.dataset;
      cell.model = r.model;
    }
    auto& fold_index = index[key];
    const auto fk = std::make_pair(r.repeat, r.fold);
    auto it = fold_index.find(fk);
    if (it == fold_index.end()) {
      it = fold_index.emplace(fk, cell.values.size()).first;
      cell.folds.push_back(fk);
      cell.values.emplace_back();
    }
    cell.values[it->second][metric_index(r.metric)] = r.value;
    cell.present[metric_index(r.metric)] = true;
  }
  std::vector<SampleCell> out;
  for (auto& [key, cell] : cells) {
    // Align rows by (repeat, fold).
    std::vector<std::size_t> order(cell.folds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cell.folds[a] < cell.folds[b]; });
    SampleCell sorted;
    sorted.dataset = cell.dataset;
    sorted.model = cell.model;
    sorted.present = cell.present;
    for (auto i : order) {
      sorted.folds.push_back(cell.folds[i]);
      sorted.values.push_back(cell.values[i]);
    }
    out.push_back(std::move(sorted));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_results_csv(std::ostream& out, const MetricSampleMatrix& samples) {
  out << "dataset,model,repeat,fold,metric_id,value\n";
  for (const auto& r : samples.records) {
    write_csv_row(out, {r.dataset, r.model, std::to_string(r.repeat), std::to_string(r.fold),
                        std::string(metric_code(r.metric)), r.value ? format_double(*r.value) : std::string()});
  }
}

std::string results_csv_string(const MetricSampleMatrix& samples) {
  std::ostringstream ss;
  write_results_csv(ss, samples);
  return ss.str();
}

MetricSampleMatrix parse_results_csv(std::string_view text) {
  const CsvTable table = parse_csv(text);
  const char* columns[] = {"dataset", "model", "repeat", "fold", "metric_id", "value"};
  std::size_t idx[6];
  for (int c = 0; c < 6; ++c) {
    const auto i = table.column_index(columns[c]);
    if (!i) throw DataError(std::string("results: missing column '") + columns[c] + "'");
    idx[c] = *i;
  }
  auto parse_int = [&](const std::string& s, std::size_t line) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw DataError("results: line " + std::to_string(line) + ": bad integer '" + s + "'");
    }
    return v;
  };
  MetricSampleMatrix m;
  m.records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    SampleRecord rec;
    rec.dataset = row[idx[0]];
    rec.model = row[idx[1]];
    rec.repeat = parse_int(row[idx[2]], line);
    rec.fold = parse_int(row[idx[3]], line);
    try {
      rec.metric = parse_metric_id(row[idx[4]]);
    } catch (const std::invalid_argument&) {
      throw DataError("results: line " + std::to_string(line) + ": unknown metric '" + row[idx[4]] + "'");
    }
    const std::string& v = row[idx[5]];
    if (!v.empty()) {
      double d = 0.0;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
      if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw DataError("results: line " + std::to_string(line) + ": bad value '" + v + "'");
      }
      rec.value = d;
    }
    m.records.push_back(std::move(rec));
  }
  return m;
}

MetricSampleMatrix read_results_file(const std::string& path) {
  try {
    return parse_results_csv(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Experiment

namespace {

struct FoldTask {
  std::size_t dataset = 0;
  std::size_t repeat = 0;
  int fold = 0;
};

struct FoldOutput {
  std::vector<SampleRecord> records;
  std::vector<std::string> warnings;
};

FoldOutput run_fold(const EncodedDataset& ds, const Eigen::MatrixXd& X_global, const CvPlan& plan,
                    const FoldTask& task, const std::vector<std::unique_ptr<Mitigator>>& mitigators,
                    const ExperimentConfig& config) {
  FoldOutput out;
  const auto train_idx = plan.train_rows(task.repeat, task.fold);
  const auto test_idx = plan.test_rows(task.repeat, task.fold);
  EncodedDataset train = ds.subset(train_idx);
  EncodedDataset test = ds.subset(test_idx);
  if (config.global_normalize) {
    train.X = X_global(std::vector<Eigen::Index>(train_idx.begin(), train_idx.end()), Eigen::all);
    test.X = X_global(std::vector<Eigen::Index>(test_idx.begin(), test_idx.end()), Eigen::all);
  } else {
    const MinMaxScaler scaler = MinMaxScaler::fit(train.X);
    train.X = scaler.transform(train.X);
    test.X = scaler.transform(test.X);
  }

  const std::string where = ds.name + " repeat " + std::to_string(task.repeat) + " fold " + std::to_string(task.fold);
  auto emit = [&](const std::string& model, MetricId id, Value v) {
    out.records.push_back(SampleRecord{ds.name, model, static_cast<int>(task.repeat), task.fold, id, v});
  };
  auto emit_undefined = [&](const std::string& model) {
    for (const auto& d : metric_catalog()) emit(model, d.id, std::nullopt);
  };

  const TrainView view{train.X, train.y, train.s};
  std::optional<double> d0;
  auto consistency_value = [&]() -> Value {
    if (!d0) {
      try {
        d0 = consistency(train.X, train.y, config.metric_options.k_neighbors);
      } catch (const std::invalid_argument& e) {
        out.warnings.push_back(where + ": consistency undefined: " + e.what());
        d0 = std::numeric_limits<double>::quiet_NaN();
      }
    }
    if (std::isnan(*d0)) return std::nullopt;
    return *d0;
  };

  for (const auto& m : mitigators) {
    const std::string model = m->name();
    std::vector<double> weights;
    std::vector<int> pred;
    try {
      weights = m->pre_process(view);
      pred = m->fit_predict(view, test.X, config.logistic);
    } catch (const std::exception& e) {
      out.warnings.push_back(where + ": model '" + model + "' recorded as Undefined: " + e.what());
      emit_undefined(model);
      continue;
    }
    const auto cls = compute_classification_metrics(test.y, pred, test.s, config.metric_options);
    for (const auto& mv : cls) emit(model, mv.id, mv.value);
    emit(model, MetricId::D0, consistency_value());
    const auto rates = dataset_rate_metrics(train.y, train.s, weights, config.metric_options.concentration);
    for (const auto& mv : rates) emit(model, mv.id, mv.value);
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(std::span<const EncodedDataset> datasets, const ExperimentConfig& config) {
  ExperimentResult result;

  std::vector<std::unique_ptr<Mitigator>> mitigators;
  for (const auto& name : config.models) mitigators.push_back(make_mitigator(name));

  std::vector<std::optional<CvPlan>> plans(datasets.size());
  std::vector<Eigen::MatrixXd> global_X(datasets.size());
  std::vector<FoldTask> tasks;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const auto& ds = datasets[d];
    try {
      for (std::size_t e = 0; e < d; ++e) {
        if (datasets[e].name == ds.name) throw ConfigError("duplicate dataset name '" + ds.name + "'");
      }
      if (ds.y.size() != ds.s.size() || static_cast<Eigen::Index>(ds.y.size()) != ds.X.rows() ||
          ds.weights.size() != ds.y.size()) {
        throw DataError("inconsistent dataset dimensions");
      }
      plans[d] = make_cv_plan(ds.row_count(), config.seeds, config.n_folds);
    } catch (const std::exception& e) {
      result.failures.push_back({ds.name, e.what()});
      continue;
    }
    if (config.global_normalize) global_X[d] = MinMaxScaler::fit(ds.X).transform(ds.X);
    for (std::size_t r = 0; r < plans[d]->n_repeats(); ++r) {
      for (int f = 0; f < config.n_folds; ++f) tasks.push_back({d, r, f});
    }
  }

  std::vector<FoldOutput> outputs(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        const auto& task = tasks[t];
        outputs[t] = run_fold(datasets[task.dataset], global_X[task.dataset], *plans[task.dataset], task, mitigators,
                              config);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, config.jobs);
  if (jobs == 1 || tasks.size() <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  std::vector<bool> failed(datasets.size(), false);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (!errors[t] || failed[tasks[t].dataset]) continue;
    failed[tasks[t].dataset] = true;
    try {
      std::rethrow_exception(errors[t]);
    } catch (const std::exception& e) {
      result.failures.push_back({datasets[tasks[t].dataset].name, e.what()});
    }
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (failed[tasks[t].dataset]) continue;
    auto& o = outputs[t];
    result.samples.records.insert(result.samples.records.end(), std::make_move_iterator(o.records.begin()),
                                  std::make_move_iterator(o.records.end()));
    result.warnings.insert(result.warnings.end(), o.warnings.begin(), o.warnings.end());
  }
  result.samples.sort_canonical();
  return result;
}

}  // namespace fairsel
