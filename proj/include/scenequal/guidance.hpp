#pragma once

#include <span>

#include <json.hpp>

#include "scenequal/branch.hpp"
#include "scenequal/image.hpp"
#include "scenequal/pair_prep.hpp"

namespace scenequal {

struct RescaleBounds {
  double a = 0.0;
  double b = 1.0;

  void validate() const;
  bool operator==(const RescaleBounds&) const = default;
};

// Per-branch soft targets, each in [-1, 1].
struct GuidanceVector {
  double iqa = 0.0;
  double vqa = 0.0;
  double rep = 0.0;

  double operator[](Branch b) const;
};

struct GuidanceBounds {
  RescaleBounds iqa{0.0, 1.0};
  RescaleBounds vqa{0.0, 1.0};
  RescaleBounds rep{0.0, 0.5};

  bool operator==(const GuidanceBounds&) const = default;
};

// 2 (x - a) / (b - a) - 1, clamped to [-1, 1].
double rescale(double x, const RescaleBounds& bounds);

// Mean per-view SSIM between the two clips.
double iqa_guidance(const Clip& s1, const Clip& s2);
double iqa_guidance(const ContrastivePair& pair);

// Mean SSIM of inter-view difference frames, each mapped to [0,1] by (d + 1) / 2.
double vqa_guidance(const Clip& s1, const Clip& s2);
double vqa_guidance(const ContrastivePair& pair);

// 1 - 4r: no replacement is the maximal similarity target.
double rep_guidance(double r);
double rep_guidance(const PairRecipe& recipe);

// Bounds from the 1st and 99th percentiles (linear interpolation) of raw scores.
RescaleBounds calibrate_bounds(std::span<const double> raw_scores);

struct RawGuidance {
  double iqa = 0.0;
  double vqa = 0.0;
};

RawGuidance raw_guidance(const ContrastivePair& pair);

// Raw IQA/VQA scores rescaled by bounds, plus the REP cue.
GuidanceVector compute_guidance(const ContrastivePair& pair, const GuidanceBounds& bounds);
GuidanceVector finish_guidance(const RawGuidance& raw, double r, const GuidanceBounds& bounds);

// Linear-interpolated percentile (q in [0, 100]) of an unsorted sample.
double percentile(std::span<const double> values, double q);

void to_json(nlohmann::json& j, const GuidanceBounds& b);
void from_json(const nlohmann::json& j, GuidanceBounds& b);

}  // namespace scenequal
