#include "scenequal/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "scenequal/error.hpp"
#include "scenequal/json_util.hpp"
#include "scenequal/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scenequal {

std::string PseudoMethod::id() const {
  if (!name.empty()) return name;
  return std::string(to_string(kind)) + "_s" + std::to_string(severity);
}

std::vector<PseudoMethod> SynthSpec::default_pseudo_methods() {
  return {{"", DistortionKind::gaussian_blur, 1},
          {"", DistortionKind::gaussian_blur, 2},
          {"", DistortionKind::gaussian_blur, 3},
          {"", DistortionKind::gaussian_blur, 5}};
}

void SynthSpec::validate() const {
  if (n_scenes < 1) throw ConfigError("synth.n_scenes must be >= 1");
  if (views_per_scene < 1) throw ConfigError("synth.views_per_scene must be >= 1");
  if (height < kMinViewSide || width < kMinViewSide) {
    throw ConfigError("synth resolution must be at least " + std::to_string(kMinViewSide) + " per side");
  }
  if (pseudo_methods.size() < 2) throw ConfigError("synth needs at least 2 pseudo methods");
  std::set<int> severities;
  std::set<std::string> ids;
  for (const auto& m : pseudo_methods) {
    if (m.kind == DistortionKind::none) throw ConfigError("synth pseudo method kind must not be 'none'");
    if (m.severity < 1 || m.severity > kMaxSeverity) throw ConfigError("synth severity must lie in 1..5");
    if (!severities.insert(m.severity).second) {
      throw ConfigError("synth pseudo method severities must be distinct so the quality ranking is known");
    }
    if (!ids.insert(m.id()).second) throw ConfigError("duplicate synth pseudo method id " + m.id());
  }
}

double synth_label(int severity, double scene_offset) { return 10.0 - 1.5 * (severity - 1) + scene_offset; }

std::string synth_scene_id(int scene_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%03d", scene_index);
  return buf;
}

namespace {

struct Layer {
  bool circle = false;
  double cx = 0, cy = 0, size = 0, aspect = 1;
  double depth = 1;
  double color[3]{};
  double stripe_freq = 0, stripe_angle = 0, stripe_amp = 0;
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::vector<Image> render_clean_scene(const SynthSpec& spec, int scene_index) {
  Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(scene_index)));
  const int h = spec.height, w = spec.width;
  const double side = std::min(h, w);

  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.1, 0.6);
    c1[c] = rng.uniform(0.4, 0.9);
  }
  const double grad_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double tex_freq = rng.uniform(0.05, 0.2);
  const double tex_angle = rng.uniform(0.0, std::numbers::pi);

  std::vector<Layer> layers(static_cast<std::size_t>(rng.between(4, 7)));
  for (auto& l : layers) {
    l.circle = rng.uniform() < 0.5;
    l.cx = rng.uniform(0.15, 0.85) * w;
    l.cy = rng.uniform(0.15, 0.85) * h;
    l.size = rng.uniform(0.1, 0.25) * side;
    l.aspect = rng.uniform(0.6, 1.6);
    l.depth = rng.uniform(1.0, 4.0);
    for (double& c : l.color) c = rng.uniform(0.05, 0.95);
    l.stripe_freq = rng.uniform(0.2, 0.8);
    l.stripe_angle = rng.uniform(0.0, std::numbers::pi);
    l.stripe_amp = rng.uniform(0.05, 0.2);
  }
  std::sort(layers.begin(), layers.end(), [](const Layer& a, const Layer& b) { return a.depth > b.depth; });

  const double baseline = 0.08 * w;
  const double bg_depth = 8.0;
  std::vector<Image> views;
  for (int v = 0; v < spec.views_per_scene; ++v) {
    const double t = spec.views_per_scene > 1 ? 2.0 * v / (spec.views_per_scene - 1) - 1.0 : 0.0;
    Image img(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double bx = x + baseline * t / bg_depth;
        const double g = 0.5 + 0.5 * std::sin(grad_angle) * (y / double(h) - 0.5) +
                         0.5 * std::cos(grad_angle) * (bx / double(w) - 0.5);
        const double tex =
            0.06 * std::sin(tex_freq * (bx * std::cos(tex_angle) + y * std::sin(tex_angle)) * 2.0 * std::numbers::pi);
        double px[3];
        for (int c = 0; c < 3; ++c) px[c] = c0[c] + (c1[c] - c0[c]) * g + tex;
        for (const auto& l : layers) {
          const double lx = x + baseline * t / l.depth - l.cx;
          const double ly = y - l.cy;
          bool inside;
          if (l.circle) {
            inside = (lx * lx) / (l.aspect * l.aspect) + ly * ly <= l.size * l.size;
          } else {
            inside = std::abs(lx) <= l.size * l.aspect && std::abs(ly) <= l.size;
          }
          if (!inside) continue;
          const double s =
              l.stripe_amp * std::sin(l.stripe_freq * (lx * std::cos(l.stripe_angle) + ly * std::sin(l.stripe_angle)));
          for (int c = 0; c < 3; ++c) px[c] = l.color[c] + s;
        }
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(clamp01(px[c]));
      }
    }
    views.push_back(std::move(img));
  }
  return views;
}

LabelSet generate(const SynthSpec& spec, const fs::path& out) {
  spec.validate();
  fs::create_directories(out);
  LabelSet labels;
  for (int s = 0; s < spec.n_scenes; ++s) {
    const std::string scene_id = synth_scene_id(s);
    const auto clean = render_clean_scene(spec, s);
    Rng scene_rng(mix_seed(mix_seed(spec.seed, static_cast<std::uint64_t>(s)), 0x5eed));
    const double offset = scene_rng.uniform(-0.5, 0.5);
    for (std::size_t m = 0; m < spec.pseudo_methods.size(); ++m) {
      const auto& method = spec.pseudo_methods[m];
      const DistortionSpec d{method.kind, method.severity,
                             mix_seed(mix_seed(spec.seed, static_cast<std::uint64_t>(s)), m + 1)};
      Scene scene{scene_id, method.id(), {}};
      for (std::size_t v = 0; v < clean.size(); ++v) {
        scene.views.push_back({apply_distortion(clean[v], d, v), static_cast<int>(v)});
      }
      write_scene(out / scene_id / method.id(), scene);
      const SceneKey key{scene_id, method.id()};
      labels.jod[key] = synth_label(method.severity, offset);
      if (!spec.dataset_ids.empty()) {
        labels.dataset[key] = spec.dataset_ids[static_cast<std::size_t>(s) % spec.dataset_ids.size()];
      }
    }
  }
  write_labels(out / "labels.json", labels);
  return labels;
}

void to_json(json& j, const SynthSpec& s) {
  json methods = json::array();
  for (const auto& m : s.pseudo_methods) {
    methods.push_back({{"name", m.id()}, {"kind", std::string(to_string(m.kind))}, {"severity", m.severity}});
  }
  j = json{{"n_scenes", s.n_scenes},   {"views_per_scene", s.views_per_scene},
           {"height", s.height},       {"width", s.width},
           {"pseudo_methods", methods}, {"seed", s.seed},
           {"dataset_ids", s.dataset_ids}};
}

void from_json(const json& j, SynthSpec& s) {
  check_keys(j, {"n_scenes", "views_per_scene", "height", "width", "pseudo_methods", "seed", "dataset_ids"}, "synth");
  s = SynthSpec{};
  s.n_scenes = j.value("n_scenes", s.n_scenes);
  s.views_per_scene = j.value("views_per_scene", s.views_per_scene);
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.seed = j.value("seed", s.seed);
  s.dataset_ids = j.value("dataset_ids", s.dataset_ids);
  if (j.contains("pseudo_methods")) {
    s.pseudo_methods.clear();
    for (const auto& m : j.at("pseudo_methods")) {
      check_keys(m, {"name", "kind", "severity"}, "synth.pseudo_methods");
      s.pseudo_methods.push_back({m.value("name", std::string()),
                                  distortion_kind_from_string(m.at("kind").get<std::string>()),
                                  m.at("severity").get<int>()});
    }
  }
}

}  // namespace scenequal
