#include <doctest.h>

#include <cmath>
#include <vector>

#include "../support.hpp"
#include "scenequal/distortion.hpp"
#include "scenequal/error.hpp"
#include "scenequal/guidance.hpp"
#include "scenequal/rng.hpp"
#include "scenequal/ssim.hpp"

using namespace scenequal;

namespace {

// SSIM of two constant images reduces to the luminance term.
double constant_ssim(double mu_a, double mu_b) {
  const double c1 = 0.01 * 0.01;
  return (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
}

Clip synthetic_clip(int views, std::uint64_t seed) {
  SynthSpec spec = sqtest::small_synth(1, views, 48, seed);
  return render_clean_scene(spec, 0);
}

Image shifted(const Image& img, float delta) {
  Image out = img;
  for (auto& v : out.pixels) v += delta;
  return out;
}

}  // namespace

TEST_CASE("rescale endpoints and midpoint") {
  const RescaleBounds b{0.5, 1.0};
  CHECK(rescale(0.5, b) == -1.0);
  CHECK(rescale(1.0, b) == 1.0);
  CHECK(rescale(0.75, b) == 0.0);
  CHECK(rescale(2.0, b) == 1.0);
  CHECK(rescale(-3.0, b) == -1.0);
  CHECK_THROWS_AS(rescale(0.5, RescaleBounds{1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(rescale(0.5, RescaleBounds{1.0, 0.0}), ConfigError);
}

TEST_CASE("rescale is increasing and clamping is idempotent") {
  const RescaleBounds b{0.2, 0.9};
  double prev = -2.0;
  for (double x = 0.2; x <= 0.9; x += 0.01) {
    const double y = rescale(x, b);
    CHECK(y > prev);
    prev = y;
    CHECK(rescale(x + 5.0, b) == 1.0);
  }
}

TEST_CASE("ssim of constant images matches the closed form") {
  for (double a : {0.1, 0.4, 0.8}) {
    for (double b : {0.1, 0.5, 0.95}) {
      CHECK(ssim(Image(16, 16, static_cast<float>(a)), Image(16, 16, static_cast<float>(b))) ==
            doctest::Approx(constant_ssim(static_cast<float>(a), static_cast<float>(b))).epsilon(1e-6));
    }
  }
}

TEST_CASE("ssim basics") {
  const auto img = sqtest::random_image(32, 32, 1);
  CHECK(ssim(img, img) == doctest::Approx(1.0));
  const auto noise = sqtest::random_image(32, 32, 2);
  CHECK(ssim(img, noise) < 0.2);
  CHECK(ssim(img, noise) == doctest::Approx(ssim(noise, img)));
  CHECK_THROWS(ssim(Image(8, 8), Image(8, 8)));
  CHECK_THROWS(ssim(Image(16, 16), Image(16, 17)));
}

TEST_CASE("iqa guidance examples") {
  const auto clip = synthetic_clip(2, 3);
  CHECK(iqa_guidance(clip, clip) == doctest::Approx(1.0));

  Clip replaced = clip;
  replaced[1] = sqtest::random_image(48, 48, 77);
  const double expected = (1.0 + ssim(clip[1], replaced[1])) / 2.0;
  CHECK(iqa_guidance(clip, replaced) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(iqa_guidance(clip, replaced) < 1.0);

  const Clip gray_a{Image(20, 20, 0.3f)}, gray_b{Image(20, 20, 0.6f)};
  CHECK(iqa_guidance(gray_a, gray_b) == doctest::Approx(constant_ssim(0.3f, 0.6f)).epsilon(1e-6));
  CHECK(iqa_guidance(gray_a, gray_b) < 1.0);

  CHECK_THROWS(iqa_guidance(clip, Clip{clip[0]}));
}

TEST_CASE("vqa guidance examples") {
  const auto clip = synthetic_clip(4, 5);
  CHECK(vqa_guidance(clip, clip) == doctest::Approx(1.0));

  Clip uniform_shift;
  for (const auto& v : clip) uniform_shift.push_back(shifted(v, 0.05f));
  CHECK(vqa_guidance(clip, uniform_shift) == doctest::Approx(1.0).epsilon(1e-5));

  Clip flicker;
  for (std::size_t i = 0; i < clip.size(); ++i) flicker.push_back(shifted(clip[i], i % 2 ? 0.08f : -0.08f));
  CHECK(vqa_guidance(clip, flicker) < vqa_guidance(clip, uniform_shift));

  CHECK_THROWS_WITH(vqa_guidance(Clip{clip[0]}, Clip{clip[0]}), doctest::Contains("needs >= 2 views"));
}

TEST_CASE("guidance is symmetric") {
  const auto a = synthetic_clip(3, 8);
  Clip b;
  for (const auto& v : a) b.push_back(apply_distortion(v, {DistortionKind::gaussian_blur, 2, 0}));
  CHECK(iqa_guidance(a, b) == doctest::Approx(iqa_guidance(b, a)).epsilon(1e-12));
  CHECK(vqa_guidance(a, b) == doctest::Approx(vqa_guidance(b, a)).epsilon(1e-12));
}

TEST_CASE("iqa guidance does not increase with noise severity") {
  const auto clip = synthetic_clip(3, 9);
  double prev = 2.0;
  for (int level = 1; level <= kMaxSeverity; ++level) {
    Clip noisy;
    for (std::size_t i = 0; i < clip.size(); ++i) {
      noisy.push_back(apply_distortion(clip[i], {DistortionKind::gaussian_noise, level, 4}, i));
    }
    const double g = iqa_guidance(clip, noisy);
    CHECK(g <= prev);
    prev = g;
  }
}

TEST_CASE("rep guidance") {
  CHECK(rep_guidance(0.0) == 1.0);
  CHECK(rep_guidance(0.25) == 0.0);
  CHECK(rep_guidance(0.5) == -1.0);
  CHECK(rep_guidance(0.1) - rep_guidance(0.2) == doctest::Approx(rep_guidance(0.3) - rep_guidance(0.4)));
  CHECK_THROWS(rep_guidance(-0.01));
  CHECK_THROWS(rep_guidance(0.51));
}

TEST_CASE("calibration") {
  std::vector<double> flat(200, 0.9);
  CHECK_THROWS_WITH(calibrate_bounds(flat), doctest::Contains("degenerate"));

  std::vector<double> few(50, 0.5);
  CHECK_THROWS(calibrate_bounds(few));

  Rng rng(12);
  std::vector<double> uni;
  for (int i = 0; i < 10000; ++i) uni.push_back(rng.uniform(0.2, 1.0));
  const auto b = calibrate_bounds(uni);
  CHECK(std::abs(b.a - 0.208) < 0.01);
  CHECK(std::abs(b.b - 0.992) < 0.01);

  std::vector<double> two;
  for (int i = 0; i < 100; ++i) two.push_back(i % 2 ? 1.0 : 0.0);
  const auto tb = calibrate_bounds(two);
  CHECK(tb.a == 0.0);
  CHECK(tb.b == 1.0);
}

TEST_CASE("percentile interpolates linearly") {
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(percentile(v, 0) == 1.0);
  CHECK(percentile(v, 100) == 4.0);
  CHECK(percentile(v, 50) == doctest::Approx(2.5));
}

TEST_CASE("bounds json round-trip") {
  GuidanceBounds b;
  b.iqa = {0.25, 0.75};
  b.vqa = {0.1, 0.9};
  const nlohmann::json j = b;
  CHECK(j.at("rep") == nlohmann::json::array({0.0, 0.5}));
  CHECK(j.get<GuidanceBounds>() == b);
}
