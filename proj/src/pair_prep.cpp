#include "scenequal/pair_prep.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "scenequal/error.hpp"
#include "scenequal/json_util.hpp"

using nlohmann::json;

namespace scenequal {

void PrepConfig::validate() const {
  if (clip_min < 2) throw ConfigError("prep.clip_min must be >= 2 (VQA guidance needs two views)");
  if (clip_max < clip_min) throw ConfigError("prep.clip_max must be >= prep.clip_min");
  if (crop_min < kMinViewSide) throw ConfigError("prep.crop_min must be >= 16");
  if (crop_max < crop_min) throw ConfigError("prep.crop_max must be >= prep.crop_min");
  if (!(distort_prob >= 0.0 && distort_prob <= 1.0)) {
    throw ConfigError("prep.distort_prob must be in [0, 1]");
  }
}

long round_half_away(double x) { return std::lround(x); }

int replaced_count(double r, int clip_length) {
  return static_cast<int>(round_half_away(r * clip_length));
}

PairRecipe sample_recipe(const DatasetIndex& index, Rng& rng, const PrepConfig& config) {
  config.validate();
  std::vector<const std::string*> eligible;
  for (const auto& [scene, methods] : index.scenes) {
    if (methods.size() >= 2) eligible.push_back(&scene);
  }
  if (eligible.empty()) throw Error("no scene has at least two methods; cannot form pairs");

  PairRecipe recipe;
  recipe.scene_id = *eligible[rng.below(eligible.size())];
  const auto& methods = index.scenes.at(recipe.scene_id);
  std::vector<std::string> names;
  for (const auto& [name, loc] : methods) names.push_back(name);
  const auto base = rng.below(names.size());
  auto repl = rng.below(names.size() - 1);
  if (repl >= base) ++repl;
  recipe.base_method_id = names[base];
  recipe.replacement_method_id = names[repl];

  const SceneLocator& loc = methods.at(recipe.base_method_id);
  const int n = static_cast<int>(loc.files.size());
  const int hi = std::min(config.clip_max, n);
  const int length = rng.between(std::min(config.clip_min, n), hi);
  const int start = rng.between(0, n - length);
  for (int i = 0; i < length; ++i) recipe.view_indices.push_back(start + i);

  const int crop_h_hi = std::min(config.crop_max, loc.height);
  const int crop_w_hi = std::min(config.crop_max, loc.width);
  recipe.crop.height = rng.between(std::min(config.crop_min, crop_h_hi), crop_h_hi);
  recipe.crop.width = rng.between(std::min(config.crop_min, crop_w_hi), crop_w_hi);
  recipe.crop.top = rng.between(0, loc.height - recipe.crop.height);
  recipe.crop.left = rng.between(0, loc.width - recipe.crop.width);
  recipe.orientation = kOrientations[rng.below(std::size(kOrientations))];

  auto maybe_distortion = [&]() -> std::optional<DistortionSpec> {
    if (rng.uniform() >= config.distort_prob) return std::nullopt;
    DistortionSpec d;
    d.kind = kDistortionKinds[rng.below(std::size(kDistortionKinds))];
    d.severity = rng.between(1, kMaxSeverity);
    d.seed = rng.next_u64();
    return d;
  };
  recipe.distortion_1 = maybe_distortion();
  recipe.distortion_2 = maybe_distortion();

  recipe.r = rng.uniform(0.0, 0.5);
  const int k = replaced_count(recipe.r, length);
  std::vector<int> positions(length);
  for (int i = 0; i < length; ++i) positions[i] = i;
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(length - i)));
    std::swap(positions[i], positions[j]);
  }
  recipe.replaced_indices.assign(positions.begin(), positions.begin() + k);
  std::sort(recipe.replaced_indices.begin(), recipe.replaced_indices.end());
  return recipe;
}

void validate_recipe(const DatasetIndex& index, const PairRecipe& recipe) {
  if (recipe.base_method_id == recipe.replacement_method_id) {
    throw Error("recipe replacement method equals base method '" + recipe.base_method_id + "'");
  }
  if (!(recipe.r >= 0.0 && recipe.r < 0.5)) throw Error("recipe r outside [0, 0.5)");
  if (recipe.view_indices.empty()) throw Error("recipe has no views");
  const int length = static_cast<int>(recipe.view_indices.size());
  if (static_cast<int>(recipe.replaced_indices.size()) != replaced_count(recipe.r, length)) {
    throw Error("recipe replaced count does not equal round(r * V)");
  }
  std::set<int> unique(recipe.replaced_indices.begin(), recipe.replaced_indices.end());
  if (unique.size() != recipe.replaced_indices.size() ||
      (!unique.empty() && (*unique.begin() < 0 || *unique.rbegin() >= length))) {
    throw Error("recipe replaced positions invalid");
  }
  const SceneLocator& base = index.locate({recipe.scene_id, recipe.base_method_id});
  const SceneLocator& repl = index.locate({recipe.scene_id, recipe.replacement_method_id});
  const CropBox& c = recipe.crop;
  if (c.top < 0 || c.left < 0 || c.height < 1 || c.width < 1 || c.top + c.height > base.height ||
      c.left + c.width > base.width) {
    throw Error("recipe crop outside the source views");
  }
  if (repl.height != base.height || repl.width != base.width) {
    throw Error("replacement method " + recipe.replacement_method_id +
                " has a different resolution than " + recipe.base_method_id);
  }
  std::vector<int> missing;
  for (int idx : recipe.view_indices) {
    if (idx < 0 || idx >= static_cast<int>(base.files.size())) {
      throw Error("base method missing view index " + std::to_string(idx));
    }
  }
  for (int pos : recipe.replaced_indices) {
    const int idx = recipe.view_indices[pos];
    if (idx >= static_cast<int>(repl.files.size())) missing.push_back(idx);
  }
  if (!missing.empty()) {
    std::string msg = "replacement method " + recipe.replacement_method_id + " missing view index";
    for (int m : missing) msg += " " + std::to_string(m);
    throw Error(msg);
  }
}

ContrastivePair realize_pair(SceneCache& cache, const PairRecipe& recipe) {
  validate_recipe(cache.index(), recipe);
  const auto base = cache.get(recipe.scene_id, recipe.base_method_id);
  const auto repl = cache.get(recipe.scene_id, recipe.replacement_method_id);
  const CropBox& c = recipe.crop;
  auto prepare = [&](const Scene& scene, int view) {
    return orient(crop(scene.views[view].pixels, c.top, c.left, c.height, c.width),
                  recipe.orientation);
  };
  auto distort = [](const Image& img, const std::optional<DistortionSpec>& d, std::uint64_t pos) {
    return d ? apply_distortion(img, *d, pos) : img;
  };

  ContrastivePair pair;
  pair.recipe = recipe;
  const std::size_t length = recipe.view_indices.size();
  pair.s1.reserve(length);
  pair.s2.reserve(length);
  for (std::size_t p = 0; p < length; ++p) {
    const Image clean = prepare(*base, recipe.view_indices[p]);
    pair.s1.push_back(distort(clean, recipe.distortion_1, p));
    pair.s2.push_back(distort(clean, recipe.distortion_2, p));
  }
  for (int p : recipe.replaced_indices) {
    pair.s2[p] = distort(prepare(*repl, recipe.view_indices[p]), recipe.distortion_2, p);
  }
  return pair;
}

ContrastivePair realize_pair(const DatasetIndex& index, const PairRecipe& recipe) {
  SceneCache cache(index);
  return realize_pair(cache, recipe);
}

namespace {

// Base-1e9 little-endian limbs; enough for any product of 64-bit factors.
using Limbs = std::vector<std::uint32_t>;

void multiply(Limbs& x, std::uint64_t f) {
  unsigned __int128 carry = 0;
  for (auto& limb : x) {
    const unsigned __int128 p = static_cast<unsigned __int128>(limb) * f + carry;
    limb = static_cast<std::uint32_t>(p % 1000000000u);
    carry = p / 1000000000u;
  }
  while (carry > 0) {
    x.push_back(static_cast<std::uint32_t>(carry % 1000000000u));
    carry /= 1000000000u;
  }
}

Limbs budget_limbs(std::uint64_t s, std::uint64_t v, std::uint64_t m, std::uint64_t c, std::uint64_t a) {
  if (s < 1 || v < 1 || m < 1 || c < 1 || a < 1) throw Error("pair_budget arguments must be >= 1");
  const unsigned __int128 mc = static_cast<unsigned __int128>(m) * c;
  if (mc > std::numeric_limits<std::uint64_t>::max()) throw Error("pair_budget: m * c exceeds 64 bits");
  const auto k = static_cast<std::uint64_t>(mc);
  // One of k, k-1 is even, so halving it first keeps every factor integral.
  const std::uint64_t f1 = k % 2 == 0 ? k / 2 : k;
  const std::uint64_t f2 = k % 2 == 0 ? k - 1 : (k - 1) / 2;
  Limbs x{1};
  for (std::uint64_t f : {a, s, v, f1, f2}) multiply(x, f);
  while (x.size() > 1 && x.back() == 0) x.pop_back();
  return x;
}

}  // namespace

std::string pair_budget_exact(std::uint64_t s, std::uint64_t v, std::uint64_t m, std::uint64_t c,
                              std::uint64_t a) {
  const Limbs x = budget_limbs(s, v, m, c, a);
  std::string out = std::to_string(x.back());
  char buf[16];
  for (std::size_t i = x.size() - 1; i-- > 0;) {
    std::snprintf(buf, sizeof(buf), "%09u", static_cast<unsigned>(x[i]));
    out += buf;
  }
  return out;
}

std::uint64_t pair_budget(std::uint64_t s, std::uint64_t v, std::uint64_t m, std::uint64_t c,
                          std::uint64_t a) {
  const Limbs x = budget_limbs(s, v, m, c, a);
  unsigned __int128 value = 0;
  for (std::size_t i = x.size(); i-- > 0;) {
    value = value * 1000000000u + x[i];
    if (value > std::numeric_limits<std::uint64_t>::max()) {
      throw Error("pair budget " + pair_budget_exact(s, v, m, c, a) + " exceeds 64 bits; use pair_budget_exact");
    }
  }
  return static_cast<std::uint64_t>(value);
}

void to_json(json& j, const DistortionSpec& d) {
  j = json{{"kind", to_string(d.kind)}, {"severity", d.severity}, {"seed", d.seed}};
}

void from_json(const json& j, DistortionSpec& d) {
  d.kind = distortion_kind_from_string(j.at("kind").get<std::string>());
  d.severity = j.at("severity").get<int>();
  d.seed = j.value("seed", std::uint64_t{0});
}

void to_json(json& j, const PairRecipe& r) {
  j = json{{"scene_id", r.scene_id},
           {"base_method_id", r.base_method_id},
           {"replacement_method_id", r.replacement_method_id},
           {"view_indices", r.view_indices},
           {"crop", {{"top", r.crop.top}, {"left", r.crop.left}, {"height", r.crop.height},
                     {"width", r.crop.width}}},
           {"orientation", to_string(r.orientation)},
           {"distortion_1", r.distortion_1 ? json(*r.distortion_1) : json(nullptr)},
           {"distortion_2", r.distortion_2 ? json(*r.distortion_2) : json(nullptr)},
           {"r", r.r},
           {"replaced_indices", r.replaced_indices}};
}

void from_json(const json& j, PairRecipe& r) {
  r.scene_id = j.at("scene_id").get<std::string>();
  r.base_method_id = j.at("base_method_id").get<std::string>();
  r.replacement_method_id = j.at("replacement_method_id").get<std::string>();
  r.view_indices = j.at("view_indices").get<std::vector<int>>();
  const auto& c = j.at("crop");
  r.crop = {c.at("top").get<int>(), c.at("left").get<int>(), c.at("height").get<int>(),
            c.at("width").get<int>()};
  r.orientation = orientation_from_string(j.at("orientation").get<std::string>());
  auto opt = [&](const char* key) -> std::optional<DistortionSpec> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<DistortionSpec>();
  };
  r.distortion_1 = opt("distortion_1");
  r.distortion_2 = opt("distortion_2");
  r.r = j.at("r").get<double>();
  r.replaced_indices = j.at("replaced_indices").get<std::vector<int>>();
}

void to_json(json& j, const PrepConfig& c) {
  j = json{{"clip_min", c.clip_min}, {"clip_max", c.clip_max}, {"crop_min", c.crop_min},
           {"crop_max", c.crop_max}, {"distort_prob", c.distort_prob}};
}

void from_json(const json& j, PrepConfig& c) {
  check_keys(j, {"clip_min", "clip_max", "crop_min", "crop_max", "distort_prob"}, "prep");
  c.clip_min = j.value("clip_min", c.clip_min);
  c.clip_max = j.value("clip_max", c.clip_max);
  c.crop_min = j.value("crop_min", c.crop_min);
  c.crop_max = j.value("crop_max", c.crop_max);
  c.distort_prob = j.value("distort_prob", c.distort_prob);
}

void write_pair_manifest(const std::filesystem::path& path, const std::vector<PairRecipe>& recipes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write pair manifest " + path.string());
  for (const auto& r : recipes) out << json(r).dump() << '\n';
}

std::vector<PairRecipe> read_pair_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pair manifest " + path.string());
  std::vector<PairRecipe> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<PairRecipe>());
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace scenequal
