#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "scenequal/image.hpp"

namespace scenequal {

inline constexpr int kMinViewSide = 16;

struct View {
  Image pixels;
  int index = 0;
};

struct Scene {
  std::string scene_id;
  std::string method_id;
  std::vector<View> views;

  int view_count() const { return static_cast<int>(views.size()); }
  int height() const { return views.empty() ? 0 : views.front().pixels.height; }
  int width() const { return views.empty() ? 0 : views.front().pixels.width; }
  Clip clip() const;
};

// (scene, method) pair; ordered lexicographically.
struct SceneKey {
  std::string scene;
  std::string method;

  auto operator<=>(const SceneKey&) const = default;
  bool operator==(const SceneKey&) const = default;
  std::string str() const { return scene + "/" + method; }
};

struct SceneLocator {
  std::vector<std::filesystem::path> files;
  int height = 0;
  int width = 0;
};

struct DatasetIndex {
  std::filesystem::path root;
  std::map<std::string, std::map<std::string, SceneLocator>> scenes;
  std::map<SceneKey, double> labels;
  // Dataset id per labeled key; used by the cross-dataset protocol.
  std::map<SceneKey, std::string> datasets;
  std::vector<std::string> warnings;

  const SceneLocator& locate(const SceneKey& key) const;
  bool contains(const SceneKey& key) const;
  std::vector<SceneKey> keys() const;
  std::size_t locator_count() const;
};

struct LabelSet {
  std::map<SceneKey, double> jod;
  std::map<SceneKey, std::string> dataset;
};

// Discovers `<root>/<scene>/<method>/<view>.png` (or reads a JSON manifest).
// A `labels.json` at the root (or the manifest's `labels`) is attached.
DatasetIndex load_dataset(const std::filesystem::path& root,
                          const std::optional<std::filesystem::path>& manifest = std::nullopt);

// Decodes every view of one (scene, method) entry.
Scene load_scene(const DatasetIndex& index, const std::string& scene_id,
                 const std::string& method_id);

// Reads `{"labels": [{"scene", "method", "jod", "dataset"?}]}`.
LabelSet read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelSet& labels);

// Attaches labels to an index; every labeled key must exist in it.
void attach_labels(DatasetIndex& index, const LabelSet& labels);

// Writes views as `view_####.png` under dir.
void write_scene(const std::filesystem::path& dir, const Scene& scene);

// Thread-safe lazy cache of decoded scenes.
class SceneCache {
 public:
  explicit SceneCache(const DatasetIndex& index) : index_(&index) {}
  std::shared_ptr<const Scene> get(const std::string& scene_id, const std::string& method_id);
  const DatasetIndex& index() const { return *index_; }

 private:
  const DatasetIndex* index_;
  std::mutex mutex_;
  std::map<SceneKey, std::shared_ptr<const Scene>> scenes_;
};

}  // namespace scenequal
