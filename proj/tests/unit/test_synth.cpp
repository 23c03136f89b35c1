#include <doctest.h>

#include "../support.hpp"
#include "scenequal/error.hpp"
#include "scenequal/guidance.hpp"
#include "scenequal/synth_data.hpp"

using namespace scenequal;
using sqtest::TempDir;

namespace {

std::size_t count_pngs(const std::filesystem::path& root) {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) n += e.path().extension() == ".png";
  return n;
}

SynthSpec three_methods() {
  auto spec = sqtest::small_synth(2, 8, 32, 3);
  spec.pseudo_methods = {{"", DistortionKind::gaussian_blur, 1},
                         {"", DistortionKind::gaussian_blur, 3},
                         {"", DistortionKind::gaussian_blur, 5}};
  return spec;
}

}  // namespace

TEST_CASE("2 scenes x 3 methods x 8 views gives 48 images") {
  TempDir dir("synth");
  generate(three_methods(), dir.path());
  CHECK(count_pngs(dir.path()) == 48);
  const auto index = load_dataset(dir.path());
  CHECK(index.locator_count() == 6);
  CHECK(index.labels.size() == 6);
}

TEST_CASE("labels decrease with severity") {
  TempDir dir("synth");
  const auto labels = generate(three_methods(), dir.path());
  for (const char* scene : {"scene_000", "scene_001"}) {
    const double s1 = labels.jod.at({scene, "gaussian_blur_s1"});
    const double s3 = labels.jod.at({scene, "gaussian_blur_s3"});
    const double s5 = labels.jod.at({scene, "gaussian_blur_s5"});
    CHECK(s1 > s3);
    CHECK(s3 > s5);
  }
}

TEST_CASE("same seed, byte-identical tree") {
  TempDir a("synth"), b("synth");
  generate(three_methods(), a.path());
  generate(three_methods(), b.path());
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    CHECK(sqtest::read_bytes(e.path()) == sqtest::read_bytes(b.path() / rel));
  }
}

TEST_CASE("iqa guidance against the clean render falls with severity") {
  const auto spec = sqtest::small_synth(3, 4, 48, 9);
  for (int s = 0; s < spec.n_scenes; ++s) {
    const auto clean = render_clean_scene(spec, s);
    for (DistortionKind kind : kDistortionKinds) {
      double prev = 2.0;
      for (int level = 1; level <= kMaxSeverity; ++level) {
        Clip degraded;
        for (std::size_t v = 0; v < clean.size(); ++v) degraded.push_back(apply_distortion(clean[v], {kind, level, 5}, v));
        const double g = iqa_guidance(clean, degraded);
        INFO("kind " << to_string(kind) << " level " << level);
        CHECK(g < prev);
        prev = g;
      }
    }
  }
}

TEST_CASE("views shift with parallax") {
  const auto clean = render_clean_scene(sqtest::small_synth(1, 3, 48, 2), 0);
  CHECK_FALSE(clean[0] == clean[2]);
}

TEST_CASE("spec validation") {
  auto spec = three_methods();
  spec.pseudo_methods.resize(1);
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = three_methods();
  spec.pseudo_methods[1].severity = 1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = three_methods();
  spec.height = 8;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("dataset ids are assigned round-robin") {
  TempDir dir("synth");
  auto spec = three_methods();
  spec.n_scenes = 3;
  spec.dataset_ids = {"A", "B"};
  generate(spec, dir.path());
  const auto index = load_dataset(dir.path());
  CHECK(index.datasets.at({"scene_000", "gaussian_blur_s1"}) == "A");
  CHECK(index.datasets.at({"scene_001", "gaussian_blur_s1"}) == "B");
  CHECK(index.datasets.at({"scene_002", "gaussian_blur_s5"}) == "A");
}

TEST_CASE("spec json round-trip") {
  const auto spec = three_methods();
  const nlohmann::json j = spec;
  const auto back = j.get<SynthSpec>();
  CHECK(nlohmann::json(back) == j);
  CHECK_THROWS_AS(nlohmann::json({{"n_scene", 2}}).get<SynthSpec>(), ConfigError);
}
