#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fairsel/analysis.hpp"

namespace fairsel {

std::string correlation_csv(const CorrelationMatrix& corr);
std::string dendrogram_dot(const Dendrogram& dg, const std::vector<MetricId>& leaves, double cut);
/// Sideways tree, one node per line, internal nodes labelled with their height.
std::string dendrogram_ascii(const Dendrogram& dg, const std::vector<MetricId>& leaves, double cut);

nlohmann::json cluster_report_json(const ClusterReport& rep);
/// clusters.json: both cluster reports plus sensitivity verdicts.
nlohmann::json analysis_json(const AnalysisResult& res, const AnalysisConfig& config);

std::string sensitivity_csv(const SensitivityReport& rep);
std::string movement_csv(const std::vector<MovementRow>& rows);
std::string report_markdown(const AnalysisResult& res, const AnalysisConfig& config);

/// Every analysis artifact keyed by file name.
struct AnalysisOutputs {
  std::vector<std::pair<std::string, std::string>> files;
};

AnalysisOutputs render_analysis(const AnalysisResult& res, const AnalysisConfig& config);

std::string scope_name(CorrelationScope scope);  // "avg" or "pooled"
/// Accepts avg, per_cell_average, pooled. Throws ConfigError otherwise.
CorrelationScope parse_scope(const std::string& name);

}  // namespace fairsel
