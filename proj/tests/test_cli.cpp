#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fairsel/csv.hpp"
#include "fairsel/error.hpp"
#include "fairsel/pipeline.hpp"
#include "fairsel/synthetic.hpp"

namespace fs = std::filesystem;
using namespace fairsel;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fairsel_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FAIRSEL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Writes a synthetic dataset plus spec and returns (csv, spec) paths.
std::pair<std::string, std::string> make_dataset(const fs::path& dir, const std::string& name, double bias,
                                                 std::size_t rows) {
  SyntheticConfig sc;
  sc.name = name;
  sc.bias = bias;
  sc.rows = rows;
  const auto csv = dir / (name + ".csv");
  const auto spec = dir / (name + ".json");
  write(csv, synthetic_csv(sc));
  write(spec, synthetic_spec(name).to_json().dump(2));
  return {csv.string(), spec.string()};
}

}  // namespace

TEST_CASE("run config parsing and validation") {
  const auto j = nlohmann::json::parse(R"({
    "datasets": [{"data": "d.csv", "spec": "d.json"}],
    "seeds": [5, 6, 7, 8, 9], "alpha": 3, "k_neighbors": 7, "concentration": 0.5,
    "sensitivity_d": 0.5, "correlation_scope": "pooled",
    "thresholds": {"zero_band": 0.05}, "global_normalize": true, "models": ["rw"], "out": "o"})");
  const auto c = RunConfig::from_json(j, "/base");
  CHECK(c.datasets[0].data_path == "/base/d.csv");
  CHECK(c.experiment.seeds[0] == 5);
  CHECK(c.experiment.metric_options.alpha == 3);
  CHECK(c.experiment.metric_options.k_neighbors == 7);
  CHECK(c.analysis.scope == CorrelationScope::pooled);
  CHECK(c.analysis.thresholds.zero_band == 0.05);
  CHECK(c.analysis.thresholds.one_low == 0.8);
  CHECK(c.experiment.models == std::vector<std::string>{"reweighing"});
  CHECK(c.out_dir == "/base/o");
  c.validate();

  auto bad = c;
  bad.experiment.seeds = {1, 2, 3};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.experiment.metric_options.alpha = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"models": ["svm"]})")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"alpha": "two"})")), ConfigError);
}

TEST_CASE("sha256 known vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("metric rows: dataset-only and with predictions") {
  const std::string csv =
      "x,g,y,pred\n0.1,a,1,1\n0.2,a,0,0\n0.3,a,1,1\n0.4,a,0,0\n0.5,a,1,1\n0.6,a,0,0\n"
      "0.7,b,1,1\n0.8,b,0,0\n0.9,b,1,1\n1.0,b,0,0\n1.1,b,1,1\n1.2,b,0,0\n";
  const auto spec = parse_dataset_spec(R"({"name":"t","label_column":"y","favorable_value":"1",
      "protected_column":"g","privileged_value":"a"})");
  const auto table = parse_csv(csv);
  const auto only = compute_metric_rows(table, spec, std::nullopt, {}, {});
  CHECK(only.size() == 4);
  CHECK(only[0].id == MetricId::D0);
  const auto all = compute_metric_rows(table, spec, std::string("pred"), {}, {});
  CHECK(all.size() == 30);
  for (const auto& r : all) {
    if (metric_def(r.id).name.find("difference") != std::string_view::npos) CHECK(r.label == FairLabel::fair);
  }
  const auto text = metric_rows_csv(all);
  CHECK(text.rfind("metric_id,name,value,ideal,label\n", 0) == 0);
  CHECK_THROWS_AS(compute_metric_rows(table, spec, std::string("nope"), {}, {}), ConfigError);
}

TEST_CASE("experiment + analyze outputs through the library") {
  const auto dir = scratch("lib");
  const auto [csv1, spec1] = make_dataset(dir, "alpha", 0.3, 300);
  const auto [csv2, spec2] = make_dataset(dir, "beta", 0.0, 300);
  RunConfig cfg;
  cfg.datasets = {{csv1, spec1}, {csv2, spec2}};
  const auto run = run_experiment_from_config(cfg);
  CHECK(run.result.samples.records.size() == 2 * 2 * 30 * 25);
  CHECK(run.manifest["partial"] == false);
  CHECK(run.manifest["inputs"].size() == 2);
  CHECK(run.manifest["inputs"][0]["data_sha256"].get<std::string>().size() == 64);
  write_experiment_outputs((dir / "out").string(), run);
  const auto res = write_analysis_outputs((dir / "out").string(), run.result.samples, cfg.analysis);
  for (const char* f : {"results.csv", "manifest.json", "correlation.csv", "correlation_dataset.csv", "dendrogram.dot",
                        "dendrogram.txt", "clusters.json", "sensitivity.csv", "movement.csv", "report.md"}) {
    CHECK_MESSAGE(fs::exists(dir / "out" / f), f);
  }
  const auto clusters = nlohmann::json::parse(slurp(dir / "out" / "clusters.json"));
  CHECK(clusters["classification"]["leaves"].size() == 26);
  CHECK(clusters["dataset"]["leaves"].size() == 4);

  // Every cluster row in report.md comes from clusters.json.
  const std::string md = slurp(dir / "out" / "report.md");
  for (const auto& c : clusters["classification"]["clusters"]) {
    for (const auto& a : c["agreement"]) {
      const std::string cell = "**" + std::to_string(a["percent"].get<int>()) + "%** (" +
                               a["majority"].get<std::string>() + ")";
      CHECK(md.find(cell) != std::string::npos);
    }
    for (const auto& id : c["metrics"]) {
      const std::string prefix = "| " + std::to_string(c["id"].get<int>()) + " | " + id.get<std::string>() + " |";
      CHECK(md.find(prefix) != std::string::npos);
    }
  }
  CHECK(md.find("Median over datasets") != std::string::npos);
  CHECK(md.find("| Dataset | Model | UF | FU | NC | Excluded |") != std::string::npos);
  CHECK(res.movement.size() == 2);

  const auto corr = parse_csv(slurp(dir / "out" / "correlation.csv"));
  CHECK(corr.header.size() == 27);
  CHECK(corr.rows.size() == 26);
}

TEST_CASE("load failures are isolated in the manifest") {
  const auto dir = scratch("partial");
  const auto [csv, spec] = make_dataset(dir, "good", 0.0, 200);
  write(dir / "bad.csv", "income,tenure,score,region,group,outcome\n1,2,3,north,A,yes\n");
  write(dir / "bad.json", synthetic_spec("bad").to_json().dump());
  RunConfig cfg;
  cfg.datasets = {{csv, spec}, {(dir / "bad.csv").string(), (dir / "bad.json").string()}};
  const auto run = run_experiment_from_config(cfg);
  CHECK(run.result.partial());
  CHECK(run.manifest["partial"] == true);
  CHECK(run.manifest["failures"][0]["dataset"] == "bad");
  CHECK(run.result.samples.records.size() == 2 * 30 * 25);
}

TEST_CASE("cli exit codes and determinism") {
  const auto dir = scratch("bin");
  const auto [csv, spec] = make_dataset(dir, "demo", 0.3, 250);
  const std::string pair = " --data " + csv + " --spec " + spec;

  CHECK(run_cli("metrics" + pair + " --out " + (dir / "m.csv").string()) == 0);
  CHECK(parse_csv(slurp(dir / "m.csv")).rows.size() == 4);
  CHECK(run_cli("metrics --data " + csv + " --spec /nonexistent.json") == 2);
  write(dir / "broken.csv", "a,b\n1,\"2\n");
  CHECK(run_cli("metrics --data " + (dir / "broken.csv").string() + " --spec " + spec) == 3);
  CHECK(run_cli("bogus") == 2);
  CHECK(run_cli("experiment" + pair + " --seeds 1 2 3 --out " + (dir / "x").string()) == 2);

  const auto out1 = dir / "run1";
  const auto out2 = dir / "run2";
  CHECK(run_cli("experiment" + pair + " --out " + out1.string()) == 0);
  CHECK(run_cli("analyze --out " + out1.string()) == 0);
  CHECK(run_cli("experiment" + pair + " --jobs 3 --out " + out2.string()) == 0);
  CHECK(run_cli("analyze --out " + out2.string()) == 0);
  for (const char* f : {"results.csv", "clusters.json", "report.md", "sensitivity.csv", "movement.csv"}) {
    CHECK_MESSAGE(slurp(out1 / f) == slurp(out2 / f), f);
  }

  const auto out3 = dir / "run3";
  CHECK(run_cli("experiment" + pair + " --models baseline --out " + out3.string()) == 0);
  CHECK(slurp(out3 / "results.csv").find("reweighing") == std::string::npos);

  write(dir / "bad.csv", "income,tenure,score,region,group,outcome\n1,2,3,north,A,yes\n");
  write(dir / "bad.json", synthetic_spec("bad").to_json().dump());
  CHECK(run_cli("experiment" + pair + " --data " + (dir / "bad.csv").string() + " --spec " +
                (dir / "bad.json").string() + " --out " + (dir / "run4").string()) == 4);
  CHECK(run_cli("analyze --results " + (dir / "missing.csv").string() + " --out " + (dir / "a").string()) == 2);
}
