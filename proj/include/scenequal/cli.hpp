#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenequal/estimator.hpp"
#include "scenequal/metrics.hpp"
#include "scenequal/synth_data.hpp"
#include "scenequal/trainer.hpp"

namespace scenequal {

struct DataConfig {
  std::filesystem::path root;
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> labels;
};

struct EvalConfig {
  std::string protocol = "half_split";  // or cross_dataset
  std::uint64_t split_seed = 0;
  double split_fraction = 0.5;
  double alpha = kDefaultRidgeAlpha;
  std::vector<std::string> train_datasets;  // empty: every dataset except the test one
  std::string test_dataset;
  std::filesystem::path out_dir = "eval";
  std::optional<std::filesystem::path> cache_dir;
};

// Sections: data, prep, guidance, backbone, train, eval, synth.
struct RunConfig {
  DataConfig data;
  TrainConfig train;
  EvalConfig eval;
  SynthSpec synth;

  nlohmann::json to_json() const;
  // SHA-256 of the canonical JSON form.
  std::string hash() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

DatasetIndex load_run_dataset(const DataConfig& data);

std::vector<PairRecipe> prepare_pairs(const DatasetIndex& index, const PrepConfig& prep, std::size_t count,
                                      std::uint64_t seed);

struct EvaluationResult {
  FitResult fit;
  std::map<SceneKey, double> predictions;  // held-out keys
  std::map<SceneKey, double> labels;       // held-out keys
  EvalReport report;
  ScatterSummary scatter;
  nlohmann::json report_json;
};

// Extract, fit, predict and score; writes report.csv, report.json,
// model.json and scatter.svg under config.eval.out_dir.
EvaluationResult run_evaluation(const RunConfig& config, const std::filesystem::path& checkpoint);
EvaluationResult run_evaluation(const RunConfig& config, const DatasetIndex& index,
                                const std::filesystem::path& checkpoint);

// Per-scene Bradley-Terry scores as JSON.
nlohmann::json bt_scores(const std::map<std::string, PreferenceTable>& tables);

// Entry point of the `scenequal` tool. Returns the process exit code:
// 0 success, 1 runtime failure, 2 usage or configuration error.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace scenequal
