#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenequal/distortion.hpp"
#include "scenequal/scene_io.hpp"

namespace scenequal {

struct PseudoMethod {
  std::string name;  // empty: derived from kind and severity
  DistortionKind kind = DistortionKind::gaussian_blur;
  int severity = 1;

  std::string id() const;
};

struct SynthSpec {
  int n_scenes = 4;
  int views_per_scene = 10;
  int height = 128;
  int width = 128;
  std::vector<PseudoMethod> pseudo_methods = default_pseudo_methods();
  std::uint64_t seed = 0;
  // When non-empty, scenes are assigned round-robin to these dataset ids
  // and the labels carry them.
  std::vector<std::string> dataset_ids;

  static std::vector<PseudoMethod> default_pseudo_methods();
  void validate() const;
};

// Label for a method of the given severity (1 is best); strictly decreasing
// in severity. `scene_offset` shifts a whole scene.
double synth_label(int severity, double scene_offset = 0.0);

// Clean procedural render of one scene: textured background and shapes at
// several depths, shifted per view to mimic a camera translating sideways.
std::vector<Image> render_clean_scene(const SynthSpec& spec, int scene_index);

std::string synth_scene_id(int scene_index);

// Writes `<out>/<scene>/<method>/view_####.png` plus `<out>/labels.json`.
LabelSet generate(const SynthSpec& spec, const std::filesystem::path& out);

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

}  // namespace scenequal
