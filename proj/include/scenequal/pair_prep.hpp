#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenequal/distortion.hpp"
#include "scenequal/image.hpp"
#include "scenequal/rng.hpp"
#include "scenequal/scene_io.hpp"

namespace scenequal {

struct PrepConfig {
  int clip_min = 4;
  int clip_max = 16;
  int crop_min = 96;
  int crop_max = 256;
  // Probability that each clip of a pair receives a random distortion.
  double distort_prob = 0.5;

  void validate() const;
  bool operator==(const PrepConfig&) const = default;
};

struct CropBox {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  bool operator==(const CropBox&) const = default;
};

struct PairRecipe {
  std::string scene_id;
  std::string base_method_id;
  std::string replacement_method_id;
  std::vector<int> view_indices;
  CropBox crop;
  Orientation orientation = Orientation::identity;
  std::optional<DistortionSpec> distortion_1;
  std::optional<DistortionSpec> distortion_2;
  double r = 0.0;
  // Positions within the clip (0-based, ascending) taken from the replacement method.
  std::vector<int> replaced_indices;

  bool operator==(const PairRecipe&) const = default;
};

struct ContrastivePair {
  Clip s1;
  Clip s2;
  PairRecipe recipe;
};

// Half-away-from-zero rounding used for the replaced-view count.
long round_half_away(double x);

// Number of views replaced for a clip of `clip_length` views at ratio r.
int replaced_count(double r, int clip_length);

// Draws one recipe. Scenes with fewer than two methods are never chosen.
PairRecipe sample_recipe(const DatasetIndex& index, Rng& rng, const PrepConfig& config);

// Checks the recipe's internal invariants and its consistency with the index.
void validate_recipe(const DatasetIndex& index, const PairRecipe& recipe);

// Builds the pair described by the recipe; deterministic.
ContrastivePair realize_pair(SceneCache& cache, const PairRecipe& recipe);
ContrastivePair realize_pair(const DatasetIndex& index, const PairRecipe& recipe);

// a * s * v * (m*c) * (m*c - 1) / 2 as an exact decimal string.
std::string pair_budget_exact(std::uint64_t s, std::uint64_t v, std::uint64_t m, std::uint64_t c,
                              std::uint64_t a);
// Same, throwing if the result does not fit in 64 bits.
std::uint64_t pair_budget(std::uint64_t s, std::uint64_t v, std::uint64_t m, std::uint64_t c,
                          std::uint64_t a);

void to_json(nlohmann::json& j, const DistortionSpec& d);
void from_json(const nlohmann::json& j, DistortionSpec& d);
void to_json(nlohmann::json& j, const PairRecipe& r);
void from_json(const nlohmann::json& j, PairRecipe& r);
void to_json(nlohmann::json& j, const PrepConfig& c);
void from_json(const nlohmann::json& j, PrepConfig& c);

// JSON-lines pair manifest, one recipe per line.
void write_pair_manifest(const std::filesystem::path& path, const std::vector<PairRecipe>& recipes);
std::vector<PairRecipe> read_pair_manifest(const std::filesystem::path& path);

}  // namespace scenequal
