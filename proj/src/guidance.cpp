#include "scenequal/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scenequal/error.hpp"
#include "scenequal/ssim.hpp"

using nlohmann::json;

namespace scenequal {

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::iqa: return "iqa";
    case Branch::vqa: return "vqa";
    case Branch::rep: return "rep";
  }
  return "iqa";
}

Branch branch_from_string(std::string_view name) {
  for (Branch b : kBranches) {
    if (to_string(b) == name) return b;
  }
  throw KeyNotFound("unknown branch '" + std::string(name) + "'");
}

void RescaleBounds::validate() const {
  if (!(a < b)) {
    throw ConfigError("rescale bounds require a < b (got a=" + std::to_string(a) +
                      ", b=" + std::to_string(b) + ")");
  }
}

double GuidanceVector::operator[](Branch b) const {
  switch (b) {
    case Branch::iqa: return iqa;
    case Branch::vqa: return vqa;
    case Branch::rep: return rep;
  }
  return iqa;
}

double rescale(double x, const RescaleBounds& bounds) {
  bounds.validate();
  const double y = 2.0 * (x - bounds.a) / (bounds.b - bounds.a) - 1.0;
  return std::clamp(y, -1.0, 1.0);
}

double iqa_guidance(const Clip& s1, const Clip& s2) {
  if (s1.size() != s2.size()) throw Error("iqa_guidance: view-count mismatch");
  if (s1.empty()) throw Error("iqa_guidance: empty clips");
  double total = 0.0;
  for (std::size_t j = 0; j < s1.size(); ++j) total += ssim(s1[j], s2[j]);
  return total / static_cast<double>(s1.size());
}

double iqa_guidance(const ContrastivePair& pair) { return iqa_guidance(pair.s1, pair.s2); }

namespace {

Image difference_frame(const Image& next, const Image& prev) {
  Image d(next.height, next.width);
  for (std::size_t i = 0; i < d.pixels.size(); ++i) {
    d.pixels[i] = 0.5f * (next.pixels[i] - prev.pixels[i] + 1.0f);
  }
  return d;
}

}  // namespace

double vqa_guidance(const Clip& s1, const Clip& s2) {
  if (s1.size() != s2.size()) throw Error("vqa_guidance: view-count mismatch");
  if (s1.size() < 2) throw Error("VQA guidance needs >= 2 views");
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < s1.size(); ++j) {
    total += ssim(difference_frame(s1[j + 1], s1[j]), difference_frame(s2[j + 1], s2[j]));
  }
  return total / static_cast<double>(s1.size() - 1);
}

double vqa_guidance(const ContrastivePair& pair) { return vqa_guidance(pair.s1, pair.s2); }

double rep_guidance(double r) {
  if (!(r >= 0.0 && r <= 0.5)) throw Error("replacement ratio must lie in [0, 0.5]");
  return 1.0 - 4.0 * r;
}

double rep_guidance(const PairRecipe& recipe) { return rep_guidance(recipe.r); }

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw Error("percentile of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

RescaleBounds calibrate_bounds(std::span<const double> raw_scores) {
  if (raw_scores.size() < 100) {
    throw Error("calibration needs >= 100 sample pairs, got " + std::to_string(raw_scores.size()));
  }
  for (double v : raw_scores) {
    if (!std::isfinite(v)) throw Error("calibration sample contains a non-finite score");
  }
  RescaleBounds bounds{percentile(raw_scores, 1.0), percentile(raw_scores, 99.0)};
  if (bounds.b - bounds.a < 1e-6) {
    throw Error("degenerate guidance distribution (spread < 1e-6); calibrate on a larger or more "
                "varied pair sample");
  }
  return bounds;
}

RawGuidance raw_guidance(const ContrastivePair& pair) {
  return {iqa_guidance(pair), vqa_guidance(pair)};
}

GuidanceVector finish_guidance(const RawGuidance& raw, double r, const GuidanceBounds& bounds) {
  return {rescale(raw.iqa, bounds.iqa), rescale(raw.vqa, bounds.vqa), rep_guidance(r)};
}

GuidanceVector compute_guidance(const ContrastivePair& pair, const GuidanceBounds& bounds) {
  return finish_guidance(raw_guidance(pair), pair.recipe.r, bounds);
}

void to_json(json& j, const GuidanceBounds& b) {
  j = json{{"iqa", {b.iqa.a, b.iqa.b}}, {"vqa", {b.vqa.a, b.vqa.b}}, {"rep", {b.rep.a, b.rep.b}}};
}

void from_json(const json& j, GuidanceBounds& b) {
  auto read = [&](const char* key) {
    const auto& arr = j.at(key);
    RescaleBounds r{arr.at(0).get<double>(), arr.at(1).get<double>()};
    r.validate();
    return r;
  };
  b.iqa = read("iqa");
  b.vqa = read("vqa");
  b.rep = read("rep");
}

}  // namespace scenequal
