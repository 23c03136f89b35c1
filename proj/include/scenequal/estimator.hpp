#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenequal/backbone_config.hpp"
#include "scenequal/scene_io.hpp"

namespace scenequal {

using Representation = std::vector<double>;
using RepresentationMap = std::map<SceneKey, Representation>;

// Frozen backbone loaded from a checkpoint; extraction never mutates weights.
class FrozenModel {
 public:
  explicit FrozenModel(const std::filesystem::path& checkpoint);
  ~FrozenModel();
  FrozenModel(FrozenModel&&) noexcept;
  FrozenModel& operator=(FrozenModel&&) noexcept;

  // Representation of a whole scene. Scenes longer than max_views are
  // uniformly subsampled when `subsample` is set, otherwise rejected.
  Representation extract(const Scene& scene, bool subsample = true) const;
  Representation extract(const Clip& clip) const;

  const BackboneConfig& config() const;
  int repr_dim() const;
  // SHA-256 of the checkpoint file.
  const std::string& checkpoint_hash() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Indices of `count` views spread uniformly over `total`.
std::vector<int> subsample_indices(int total, int count);

Representation extract(const std::filesystem::path& checkpoint, const Scene& scene);

struct RegressionModel {
  std::vector<double> coefficients;
  double intercept = 0.0;
  double alpha = 0.0;
  std::vector<SceneKey> fitted_on;
  nlohmann::json split;  // split metadata (seed, fraction or dataset ids)

  double predict(std::span<const double> repr) const;
};

struct FitResult {
  RegressionModel model;
  std::vector<SceneKey> held_out;
};

inline constexpr double kDefaultRidgeAlpha = 1e-3;

// Ridge regression (intercept unpenalized) on a seeded random fraction of
// the labeled keys; returns the model and the complementary keys.
FitResult fit(const RepresentationMap& representations, const std::map<SceneKey, double>& labels,
              std::uint64_t split_seed, double split_fraction, double alpha = kDefaultRidgeAlpha);

// Ridge fit on an explicit key list.
RegressionModel fit_keys(const RepresentationMap& representations, const std::map<SceneKey, double>& labels,
                         const std::vector<SceneKey>& keys, double alpha);

double predict(const RegressionModel& model, std::span<const double> repr);

// Fits on every labeled key whose dataset id is in train_ids; returns all
// keys of test_id for evaluation.
FitResult cross_dataset_fit(const RepresentationMap& representations, const std::map<SceneKey, double>& labels,
                            const std::map<SceneKey, std::string>& dataset_of,
                            const std::set<std::string>& train_ids, const std::string& test_id,
                            double alpha = kDefaultRidgeAlpha);

// Deterministic partition of keys: first is the training part.
std::pair<std::vector<SceneKey>, std::vector<SceneKey>> split_keys(std::vector<SceneKey> keys, std::uint64_t seed,
                                                                   double fraction);

void to_json(nlohmann::json& j, const RegressionModel& m);
void from_json(const nlohmann::json& j, RegressionModel& m);

// On-disk cache: `<dir>/<scene>__<method>.bin` (float64 values) plus a
// `.json` sidecar carrying the checkpoint hash and dimension.
class RepresentationCache {
 public:
  explicit RepresentationCache(std::filesystem::path dir);
  std::optional<Representation> get(const SceneKey& key, const std::string& checkpoint_hash) const;
  void put(const SceneKey& key, const std::string& checkpoint_hash, const Representation& repr) const;

 private:
  std::filesystem::path stem(const SceneKey& key) const;
  std::filesystem::path dir_;
};

// Extracts every key of the index (through the cache when given).
RepresentationMap extract_all(const FrozenModel& model, const DatasetIndex& index,
                              const std::vector<SceneKey>& keys, const RepresentationCache* cache = nullptr);

}  // namespace scenequal
