#include "fairsel/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fairsel/error.hpp"

namespace fairsel {

namespace {

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string json_scalar_to_string(const nlohmann::json& v, const std::string& field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return v.dump();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  throw ConfigError("dataset spec: field '" + field + "' must be a string or number");
}

std::string required_string(const nlohmann::json& j, const std::string& field) {
  if (!j.contains(field)) throw ConfigError("dataset spec: missing field '" + field + "'");
  return json_scalar_to_string(j.at(field), field);
}

}  // namespace

bool values_match(std::string_view raw, std::string_view target) {
  auto trim = [](std::string_view v) {
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return v;
  };
  raw = trim(raw);
  target = trim(target);
  if (raw == target) return true;
  const auto a = parse_number(raw);
  const auto b = parse_number(target);
  return a && b && *a == *b;
}

bool is_missing_cell(std::string_view cell) { return cell.empty() || cell == "?" || cell == "NA"; }

// ---------------------------------------------------------------------------
// DatasetSpec

DatasetSpec DatasetSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("dataset spec: top level must be a JSON object");
  DatasetSpec spec;
  spec.name = j.contains("name") ? json_scalar_to_string(j.at("name"), "name") : std::string("dataset");
  spec.label_column = required_string(j, "label_column");
  spec.favorable_value = required_string(j, "favorable_value");
  spec.protected_column = required_string(j, "protected_column");
  spec.privileged_value = required_string(j, "privileged_value");
  if (j.contains("protected_as_feature")) spec.protected_as_feature = j.at("protected_as_feature").get<bool>();

  if (j.contains("feature_columns")) {
    const auto& cols = j.at("feature_columns");
    if (!cols.is_array()) throw ConfigError("dataset spec: 'feature_columns' must be an array");
    for (const auto& c : cols) {
      FeatureColumn fc;
      if (c.is_string()) {
        fc.name = c.get<std::string>();
      } else if (c.is_object()) {
        fc.name = required_string(c, "name");
        const std::string kind = c.value("kind", std::string("numeric"));
        if (kind == "numeric") {
          fc.kind = FeatureKind::numeric;
        } else if (kind == "categorical") {
          fc.kind = FeatureKind::categorical;
        } else {
          throw ConfigError("dataset spec: column '" + fc.name + "' has unknown kind '" + kind + "'");
        }
        const std::string enc = c.value("encoding", std::string("one_hot"));
        if (enc == "one_hot") {
          fc.encoding = CategoricalEncoding::one_hot;
        } else if (enc == "label_encode") {
          fc.encoding = CategoricalEncoding::label_encode;
        } else {
          throw ConfigError("dataset spec: column '" + fc.name + "' has unknown encoding '" + enc + "'");
        }
      } else {
        throw ConfigError("dataset spec: feature_columns entries must be strings or objects");
      }
      spec.feature_columns.push_back(std::move(fc));
    }
  }

  if (spec.label_column == spec.protected_column) {
    throw ConfigError("dataset spec: label_column and protected_column must differ");
  }
  std::set<std::string> seen;
  for (const auto& fc : spec.feature_columns) {
    if (fc.name == spec.label_column || fc.name == spec.protected_column) {
      throw ConfigError("dataset spec: feature column '" + fc.name + "' duplicates the label or protected column");
    }
    if (!seen.insert(fc.name).second) throw ConfigError("dataset spec: duplicate feature column '" + fc.name + "'");
  }
  return spec;
}

nlohmann::json DatasetSpec::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["label_column"] = label_column;
  j["favorable_value"] = favorable_value;
  j["protected_column"] = protected_column;
  j["privileged_value"] = privileged_value;
  j["protected_as_feature"] = protected_as_feature;
  auto cols = nlohmann::json::array();
  for (const auto& fc : feature_columns) {
    nlohmann::json c;
    c["name"] = fc.name;
    c["kind"] = fc.kind == FeatureKind::numeric ? "numeric" : "categorical";
    if (fc.kind == FeatureKind::categorical) {
      c["encoding"] = fc.encoding == CategoricalEncoding::one_hot ? "one_hot" : "label_encode";
    }
    cols.push_back(std::move(c));
  }
  j["feature_columns"] = std::move(cols);
  return j;
}

DatasetSpec parse_dataset_spec(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("dataset spec: invalid JSON: ") + e.what());
  }
  try {
    return DatasetSpec::from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dataset spec: ") + e.what());
  }
}

DatasetSpec load_dataset_spec(const std::string& path) {
  try {
    return parse_dataset_spec(read_text_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// EncodedDataset

EncodedDataset EncodedDataset::subset(std::span<const std::size_t> rows) const {
  EncodedDataset out;
  out.name = name;
  out.feature_names = feature_names;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.reserve(rows.size());
  out.s.reserve(rows.size());
  out.weights.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    if (r >= row_count()) throw std::out_of_range("EncodedDataset::subset: row index out of range");
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(r));
    out.y.push_back(y[r]);
    out.s.push_back(s[r]);
    out.weights.push_back(weights[r]);
  }
  return out;
}

MinMaxScaler MinMaxScaler::fit(const Eigen::MatrixXd& X) {
  MinMaxScaler sc;
  if (X.rows() == 0) {
    sc.min_ = Eigen::VectorXd::Zero(X.cols());
    sc.max_ = Eigen::VectorXd::Zero(X.cols());
    return sc;
  }
  sc.min_ = X.colwise().minCoeff().transpose();
  sc.max_ = X.colwise().maxCoeff().transpose();
  return sc;
}

Eigen::MatrixXd MinMaxScaler::transform(const Eigen::MatrixXd& X) const {
  if (X.cols() != min_.size()) throw std::invalid_argument("MinMaxScaler::transform: column count mismatch");
  Eigen::MatrixXd out(X.rows(), X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const double lo = min_[c];
    const double range = max_[c] - lo;
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      if (range <= 0.0) {
        out(r, c) = 0.0;
      } else {
        out(r, c) = std::clamp((X(r, c) - lo) / range, 0.0, 1.0);
      }
    }
  }
  return out;
}

namespace {

struct ColumnPlan {
  std::size_t source = 0;
  FeatureColumn column;
  std::vector<std::string> categories;  // sorted, categorical only
};

}  // namespace

EncodedDataset encode_table(const CsvTable& table, const DatasetSpec& spec,
                            std::span<const std::string> excluded_columns) {
  auto require_column = [&](const std::string& name) {
    const auto idx = table.column_index(name);
    if (!idx) throw ConfigError("dataset '" + spec.name + "': missing column '" + name + "'");
    return *idx;
  };
  const std::size_t label_idx = require_column(spec.label_column);
  const std::size_t prot_idx = require_column(spec.protected_column);

  std::vector<FeatureColumn> features = spec.feature_columns;
  const bool infer = features.empty();
  if (infer) {
    for (const auto& h : table.header) {
      if (h == spec.label_column || h == spec.protected_column) continue;
      if (std::find(excluded_columns.begin(), excluded_columns.end(), h) != excluded_columns.end()) continue;
      features.push_back(FeatureColumn{h, FeatureKind::numeric, CategoricalEncoding::one_hot});
    }
  }

  std::vector<ColumnPlan> plans;
  plans.reserve(features.size());
  for (const auto& fc : features) plans.push_back(ColumnPlan{require_column(fc.name), fc, {}});

  // Drop rows with missing cells in any used column.
  EncodedDataset out;
  out.name = spec.name;
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    bool missing = is_missing_cell(row[label_idx]) || is_missing_cell(row[prot_idx]);
    for (const auto& p : plans) missing = missing || is_missing_cell(row[p.source]);
    if (missing) {
      out.rejected_rows.push_back(r);
    } else {
      kept.push_back(r);
    }
  }
  if (kept.empty()) throw DataError("dataset '" + spec.name + "': no complete data rows");

  if (infer) {
    for (auto& p : plans) {
      const bool numeric = std::all_of(kept.begin(), kept.end(), [&](std::size_t r) {
        return parse_number(table.rows[r][p.source]).has_value();
      });
      p.column.kind = numeric ? FeatureKind::numeric : FeatureKind::categorical;
    }
  }

  std::size_t n_cols = 0;
  for (auto& p : plans) {
    if (p.column.kind == FeatureKind::categorical) {
      std::set<std::string> cats;
      for (auto r : kept) cats.insert(table.rows[r][p.source]);
      p.categories.assign(cats.begin(), cats.end());
      if (p.column.encoding == CategoricalEncoding::one_hot) {
        for (const auto& c : p.categories) out.feature_names.push_back(p.column.name + "=" + c);
        n_cols += p.categories.size();
        continue;
      }
    }
    out.feature_names.push_back(p.column.name);
    ++n_cols;
  }
  if (spec.protected_as_feature) {
    out.feature_names.push_back(spec.protected_column);
    ++n_cols;
  }

  const auto n = static_cast<Eigen::Index>(kept.size());
  out.X = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(n_cols));
  out.y.resize(kept.size());
  out.s.resize(kept.size());
  out.weights.assign(kept.size(), 1.0);

  bool saw_privileged = false;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& row = table.rows[kept[i]];
    out.y[i] = values_match(row[label_idx], spec.favorable_value) ? 1 : 0;
    out.s[i] = values_match(row[prot_idx], spec.privileged_value) ? 1 : 0;
    saw_privileged = saw_privileged || out.s[i] == 1;

    Eigen::Index col = 0;
    for (const auto& p : plans) {
      const std::string& cell = row[p.source];
      if (p.column.kind == FeatureKind::numeric) {
        const auto v = parse_number(cell);
        if (!v) {
          throw DataError("dataset '" + spec.name + "': line " + std::to_string(table.line_numbers[kept[i]]) +
                          ": column '" + p.column.name + "' is not numeric: '" + cell + "'");
        }
        out.X(static_cast<Eigen::Index>(i), col++) = *v;
        continue;
      }
      const auto pos = std::lower_bound(p.categories.begin(), p.categories.end(), cell) - p.categories.begin();
      if (p.column.encoding == CategoricalEncoding::one_hot) {
        out.X(static_cast<Eigen::Index>(i), col + pos) = 1.0;
        col += static_cast<Eigen::Index>(p.categories.size());
      } else {
        out.X(static_cast<Eigen::Index>(i), col++) = static_cast<double>(pos);
      }
    }
    if (spec.protected_as_feature) out.X(static_cast<Eigen::Index>(i), col) = out.s[i];
  }

  if (!saw_privileged) {
    throw DataError("dataset '" + spec.name + "': privileged value '" + spec.privileged_value +
                    "' never occurs in column '" + spec.protected_column + "'");
  }
  if (std::all_of(out.s.begin(), out.s.end(), [](int v) { return v == 1; })) {
    throw DataError("dataset '" + spec.name + "': column '" + spec.protected_column +
                    "' has no unprivileged rows");
  }
  const auto favorable = std::count(out.y.begin(), out.y.end(), 1);
  if (favorable == 0) {
    throw DataError("dataset '" + spec.name + "': favorable value '" + spec.favorable_value +
                    "' never occurs in column '" + spec.label_column + "'");
  }
  if (favorable == static_cast<std::ptrdiff_t>(out.y.size())) {
    throw DataError("dataset '" + spec.name + "': column '" + spec.label_column + "' has only favorable outcomes");
  }
  return out;
}

EncodedDataset load_dataset(std::string_view csv_text, const DatasetSpec& spec) {
  EncodedDataset ds = encode_table(parse_csv(csv_text), spec);
  ds.X = MinMaxScaler::fit(ds.X).transform(ds.X);
  return ds;
}

EncodedDataset load_dataset_file(const std::string& csv_path, const DatasetSpec& spec) {
  EncodedDataset ds = encode_table(read_csv_file(csv_path), spec);
  ds.X = MinMaxScaler::fit(ds.X).transform(ds.X);
  return ds;
}

// ---------------------------------------------------------------------------
// Grouped confusion

ConfusionMass ConfusionMass::from_counts(const ConfusionCounts& c) {
  return {static_cast<double>(c.tp), static_cast<double>(c.fp), static_cast<double>(c.fn),
          static_cast<double>(c.tn)};
}

GroupedConfusionMatrix build_grouped_confusion(std::span<const int> y_true, std::span<const int> y_pred,
                                               std::span<const int> s, std::span<const double> weights) {
  if (y_true.size() != y_pred.size() || y_true.size() != s.size()) {
    throw std::invalid_argument("build_grouped_confusion: y_true, y_pred and s must have equal length");
  }
  if (!weights.empty() && weights.size() != y_true.size()) {
    throw std::invalid_argument("build_grouped_confusion: weights length mismatch");
  }
  GroupedConfusionMatrix cm;
  ConfusionMass wp, wu;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i], g = s[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1) || (g != 0 && g != 1)) {
      throw std::invalid_argument("build_grouped_confusion: entries must be 0 or 1");
    }
    ConfusionCounts& c = g == 1 ? cm.privileged : cm.unprivileged;
    ConfusionMass& m = g == 1 ? wp : wu;
    const double w = weights.empty() ? 1.0 : weights[i];
    if (t == 1 && p == 1) {
      ++c.tp;
      m.tp += w;
    } else if (t == 0 && p == 1) {
      ++c.fp;
      m.fp += w;
    } else if (t == 1 && p == 0) {
      ++c.fn;
      m.fn += w;
    } else {
      ++c.tn;
      m.tn += w;
    }
  }
  if (cm.privileged.total() == 0 || cm.unprivileged.total() == 0) {
    throw GroupCoverageError("build_grouped_confusion: both privileged and unprivileged rows are required");
  }
  if (!weights.empty()) {
    cm.weighted_privileged = wp;
    cm.weighted_unprivileged = wu;
  }
  return cm;
}

}  // namespace fairsel
