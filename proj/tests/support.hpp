#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <unistd.h>

#include "scenequal/synth_data.hpp"
#include "scenequal/trainer.hpp"

namespace sqtest {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("scenequal_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline scenequal::Image random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  scenequal::Image img(h, w);
  for (auto& v : img.pixels) v = u(gen);
  return img;
}

inline scenequal::SynthSpec small_synth(int scenes = 2, int views = 6, int side = 48, std::uint64_t seed = 1) {
  scenequal::SynthSpec spec;
  spec.n_scenes = scenes;
  spec.views_per_scene = views;
  spec.height = side;
  spec.width = side;
  spec.seed = seed;
  return spec;
}

// Small enough for a few optimizer steps per second on one core.
inline scenequal::TrainConfig tiny_train_config(const fs::path& out_dir) {
  scenequal::TrainConfig c;
  c.epochs = 1;
  c.batch_size = 3;
  c.pairs_per_epoch = 6;
  c.learning_rate = 1e-3;
  c.seed = 11;
  c.calibration_pairs = 100;
  c.prep.clip_min = 2;
  c.prep.clip_max = 3;
  c.prep.crop_min = 24;
  c.prep.crop_max = 32;
  c.backbone.stage_channels = {4, 8, 8, 16};
  c.backbone.repr_dim = 16;
  c.backbone.transformer_layers = 1;
  c.backbone.attention_heads = 2;
  c.backbone.projector_hidden = 16;
  c.backbone.projector_out = 8;
  c.backbone.max_views = 16;
  c.out_dir = out_dir;
  return c;
}

}  // namespace sqtest
