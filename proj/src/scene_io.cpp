#include "scenequal/scene_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "scenequal/error.hpp"
#include "scenequal/image_io.hpp"
#include "scenequal/log.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scenequal {
namespace {

// Sort key: the last run of digits in the stem, then the full name.
std::pair<long long, std::string> view_order_key(const fs::path& p) {
  const std::string stem = p.stem().string();
  long long number = -1;
  std::size_t end = stem.size();
  while (end > 0 && !std::isdigit(static_cast<unsigned char>(stem[end - 1]))) --end;
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
  if (begin < end) number = std::stoll(stem.substr(begin, std::min<std::size_t>(end - begin, 18)));
  return {number, p.filename().string()};
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (directories ? entry.is_directory() : entry.is_regular_file()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Fills height/width and validates that every file shares one resolution.
void resolve_shape(SceneLocator& loc, const SceneKey& key, DatasetIndex& index) {
  std::map<std::pair<int, int>, std::vector<std::string>> shapes;
  for (const auto& f : loc.files) {
    const ImageHeader h = read_image_header(f);
    shapes[{h.height, h.width}].push_back(f.filename().string());
    if (is_jpeg_path(f)) {
      const std::string msg = "JPEG input " + f.string() +
                              " may carry compression artifacts; PNG is preferred";
      index.warnings.push_back(msg);
      log::warn(msg);
    }
  }
  if (shapes.size() > 1) {
    std::string msg = "mixed resolutions in " + key.str() + ":";
    for (const auto& [shape, files] : shapes) {
      msg += " " + std::to_string(shape.first) + "x" + std::to_string(shape.second) + " [";
      for (std::size_t i = 0; i < files.size(); ++i) msg += (i ? ", " : "") + files[i];
      msg += "]";
    }
    throw Error(msg);
  }
  loc.height = shapes.begin()->first.first;
  loc.width = shapes.begin()->first.second;
}

void add_locator(DatasetIndex& index, const std::string& scene, const std::string& method,
                 std::vector<fs::path> files) {
  const SceneKey key{scene, method};
  if (files.empty()) {
    const std::string msg = "no images for " + key.str() + "; excluded";
    index.warnings.push_back(msg);
    log::warn(msg);
    return;
  }
  SceneLocator loc;
  loc.files = std::move(files);
  resolve_shape(loc, key, index);
  index.scenes[scene][method] = std::move(loc);
}

LabelSet parse_labels(const json& j) {
  LabelSet out;
  for (const auto& entry : j) {
    const SceneKey key{entry.at("scene").get<std::string>(), entry.at("method").get<std::string>()};
    out.jod[key] = entry.at("jod").get<double>();
    if (entry.contains("dataset")) out.dataset[key] = entry.at("dataset").get<std::string>();
  }
  return out;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

Clip Scene::clip() const {
  Clip out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(v.pixels);
  return out;
}

const SceneLocator& DatasetIndex::locate(const SceneKey& key) const {
  auto s = scenes.find(key.scene);
  if (s == scenes.end()) throw KeyNotFound("scene '" + key.scene + "' not in index");
  auto m = s->second.find(key.method);
  if (m == s->second.end()) {
    throw KeyNotFound("method '" + key.method + "' not in index for scene '" + key.scene + "'");
  }
  return m->second;
}

bool DatasetIndex::contains(const SceneKey& key) const {
  auto s = scenes.find(key.scene);
  return s != scenes.end() && s->second.count(key.method) > 0;
}

std::vector<SceneKey> DatasetIndex::keys() const {
  std::vector<SceneKey> out;
  for (const auto& [scene, methods] : scenes) {
    for (const auto& [method, loc] : methods) out.push_back({scene, method});
  }
  return out;
}

std::size_t DatasetIndex::locator_count() const {
  std::size_t n = 0;
  for (const auto& [scene, methods] : scenes) n += methods.size();
  return n;
}

LabelSet read_labels(const fs::path& path) {
  const json j = read_json_file(path);
  try {
    return parse_labels(j.is_object() ? j.at("labels") : j);
  } catch (const json::exception& e) {
    throw FormatError("invalid labels file " + path.string() + ": " + e.what());
  }
}

void write_labels(const fs::path& path, const LabelSet& labels) {
  json arr = json::array();
  for (const auto& [key, jod] : labels.jod) {
    json entry{{"scene", key.scene}, {"method", key.method}, {"jod", jod}};
    if (auto d = labels.dataset.find(key); d != labels.dataset.end()) entry["dataset"] = d->second;
    arr.push_back(std::move(entry));
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << json{{"labels", arr}}.dump(2) << '\n';
}

void attach_labels(DatasetIndex& index, const LabelSet& labels) {
  for (const auto& [key, jod] : labels.jod) {
    if (!index.contains(key)) throw KeyNotFound("labeled key " + key.str() + " not in index");
    index.labels[key] = jod;
  }
  for (const auto& [key, dataset] : labels.dataset) index.datasets[key] = dataset;
}

DatasetIndex load_dataset(const fs::path& root, const std::optional<fs::path>& manifest) {
  if (!fs::is_directory(root)) throw Error("dataset directory not found: " + root.string());
  DatasetIndex index;
  index.root = root;

  if (manifest) {
    const json j = read_json_file(*manifest);
    try {
      for (const auto& [scene, methods] : j.at("scenes").items()) {
        for (const auto& [method, files] : methods.items()) {
          std::vector<fs::path> paths;
          for (const auto& f : files) {
            const fs::path p = f.get<std::string>();
            paths.push_back(p.is_absolute() ? p : root / p);
          }
          add_locator(index, scene, method, std::move(paths));
        }
      }
      if (index.scenes.empty()) throw Error("no scenes found in manifest " + manifest->string());
      if (j.contains("labels")) attach_labels(index, parse_labels(j.at("labels")));
    } catch (const json::exception& e) {
      throw FormatError("invalid manifest " + manifest->string() + ": " + e.what());
    }
    return index;
  }

  for (const auto& scene_dir : sorted_entries(root, true)) {
    for (const auto& method_dir : sorted_entries(scene_dir, true)) {
      std::vector<fs::path> files;
      for (const auto& f : sorted_entries(method_dir, false)) {
        if (is_image_path(f)) files.push_back(f);
      }
      std::stable_sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return view_order_key(a) < view_order_key(b);
      });
      add_locator(index, scene_dir.filename().string(), method_dir.filename().string(),
                  std::move(files));
    }
  }
  if (index.scenes.empty()) throw Error("no scenes found under " + root.string());
  if (fs::exists(root / "labels.json")) attach_labels(index, read_labels(root / "labels.json"));
  return index;
}

Scene load_scene(const DatasetIndex& index, const std::string& scene_id,
                 const std::string& method_id) {
  const SceneLocator& loc = index.locate({scene_id, method_id});
  Scene scene;
  scene.scene_id = scene_id;
  scene.method_id = method_id;
  scene.views.reserve(loc.files.size());
  for (std::size_t i = 0; i < loc.files.size(); ++i) {
    Image img = read_image(loc.files[i]);
    if (img.height != loc.height || img.width != loc.width) {
      throw Error("shape mismatch in " + loc.files[i].string() + ": expected " +
                  std::to_string(loc.height) + "x" + std::to_string(loc.width) + ", got " +
                  std::to_string(img.height) + "x" + std::to_string(img.width));
    }
    if (img.height < kMinViewSide || img.width < kMinViewSide) {
      throw Error("view " + loc.files[i].string() + " smaller than 16x16");
    }
    for (float v : img.pixels) {
      if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
        throw Error("non-normalized pixel in " + loc.files[i].string());
      }
    }
    scene.views.push_back({std::move(img), static_cast<int>(i)});
  }
  return scene;
}

void write_scene(const fs::path& dir, const Scene& scene) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "view_%04zu.png", i);
    write_png(dir / name, scene.views[i].pixels);
  }
}

std::shared_ptr<const Scene> SceneCache::get(const std::string& scene_id,
                                             const std::string& method_id) {
  const SceneKey key{scene_id, method_id};
  {
    std::lock_guard lock(mutex_);
    if (auto it = scenes_.find(key); it != scenes_.end()) return it->second;
  }
  auto scene = std::make_shared<const Scene>(load_scene(*index_, scene_id, method_id));
  std::lock_guard lock(mutex_);
  return scenes_.emplace(key, std::move(scene)).first->second;
}

}  // namespace scenequal
