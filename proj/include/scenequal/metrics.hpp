#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenequal/scene_io.hpp"

namespace scenequal {

// Correlations between equally long vectors. A constant input yields 0 and
// a warning through the log hook.
double srcc(std::span<const double> x, std::span<const double> y);
double plcc(std::span<const double> x, std::span<const double> y);
// Kendall tau-b, O(n log n).
double krcc(std::span<const double> x, std::span<const double> y);

// Average (1-based) ranks; ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1); 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

struct SceneMetrics {
  double srcc = 0.0;
  double plcc = 0.0;
  double krcc = 0.0;
  int n_methods = 0;
};

struct EvalReport {
  std::map<std::string, SceneMetrics> per_scene;
  MeanStd srcc, plcc, krcc;
  std::vector<std::string> skipped;

  std::string to_csv() const;
  nlohmann::json aggregate_json() const;
};

EvalReport scene_wise_report(const std::map<SceneKey, double>& predictions, const std::map<SceneKey, double>& labels);

struct PreferenceTable {
  std::vector<std::string> items;
  std::vector<std::vector<double>> wins;  // wins[i][j]: times i beat j

  void validate() const;
};

struct BradleyTerryResult {
  std::map<std::string, double> scores;
  std::vector<double> strengths;  // in item order, summing to 1
  std::vector<double> log_likelihood;  // one entry per iterate, starting at uniform
  int iterations = 0;
  bool converged = false;
};

inline constexpr int kBradleyTerryMaxIters = 10000;
inline constexpr double kBradleyTerryTol = 1e-8;

BradleyTerryResult bradley_terry(const PreferenceTable& table, int max_iters = kBradleyTerryMaxIters,
                                 double tol = kBradleyTerryTol);

double bradley_terry_log_likelihood(const PreferenceTable& table, std::span<const double> strengths);

// Parses `scene,winner_method,loser_method,count` rows (an optional header
// line is skipped) into one table per scene. Throws FormatError with the
// line number on malformed rows.
std::map<std::string, PreferenceTable> read_comparisons_csv(const std::filesystem::path& path);
std::map<std::string, PreferenceTable> parse_comparisons_csv(const std::string& text);

struct VarianceAnalysis {
  std::map<std::string, double> intra_std;
  double inter_std = 0.0;
  double median_intra = 0.0;
  double fraction_exceeding = 0.0;
};

VarianceAnalysis variance_analysis(const std::map<std::string, std::vector<double>>& clip_scores);

// Per-scene scatter of prediction vs label with least-squares lines. The
// title reports how many scenes have a positive slope.
struct ScatterSummary {
  int positive = 0;
  int total = 0;
  std::map<std::string, double> slopes;
};

ScatterSummary scatter_summary(const std::map<SceneKey, double>& predictions, const std::map<SceneKey, double>& labels);
std::string scatter_svg(const std::map<SceneKey, double>& predictions, const std::map<SceneKey, double>& labels,
                        const std::string& title_prefix = "");
ScatterSummary write_scatter_svg(const std::filesystem::path& out, const std::map<SceneKey, double>& predictions,
                                 const std::map<SceneKey, double>& labels, const std::string& title_prefix = "");

}  // namespace scenequal
