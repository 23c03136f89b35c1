#include "scenequal/estimator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "scenequal/backbone.hpp"
#include "scenequal/checkpoint.hpp"
#include "scenequal/error.hpp"
#include "scenequal/rng.hpp"
#include "torch_state.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scenequal {

struct FrozenModel::Impl {
  BackboneConfig config;
  SceneNet net{nullptr};
  std::string hash;
};

FrozenModel::FrozenModel(const fs::path& checkpoint) : impl_(std::make_unique<Impl>()) {
  impl_->hash = sha256_file(checkpoint);
  const CheckpointData data = read_checkpoint(checkpoint);
  try {
    impl_->config = data.meta.at("backbone").get<BackboneConfig>();
  } catch (const json::exception& e) {
    throw FormatError("checkpoint " + checkpoint.string() + " lacks a backbone config: " + e.what());
  }
  impl_->net = SceneNet(impl_->config);
  detail::load_module(*impl_->net, data);
  impl_->net->eval();
  for (auto& p : impl_->net->parameters()) p.requires_grad_(false);
}

FrozenModel::~FrozenModel() = default;
FrozenModel::FrozenModel(FrozenModel&&) noexcept = default;
FrozenModel& FrozenModel::operator=(FrozenModel&&) noexcept = default;

const BackboneConfig& FrozenModel::config() const { return impl_->config; }
int FrozenModel::repr_dim() const { return impl_->config.repr_dim; }
const std::string& FrozenModel::checkpoint_hash() const { return impl_->hash; }

Representation FrozenModel::extract(const Clip& clip) const {
  if (clip.empty()) throw Error("cannot extract a representation from an empty clip");
  if (static_cast<int>(clip.size()) > impl_->config.max_views) {
    throw Error("clip has " + std::to_string(clip.size()) + " views; max_views is " +
                std::to_string(impl_->config.max_views));
  }
  torch::NoGradGuard guard;
  auto repr = impl_->net->represent(clip_to_tensor(clip).unsqueeze(0)).to(torch::kFloat64).contiguous();
  return {repr.data_ptr<double>(), repr.data_ptr<double>() + repr.numel()};
}

Representation FrozenModel::extract(const Scene& scene, bool subsample) const {
  const int n = scene.view_count();
  if (n > impl_->config.max_views && !subsample) {
    throw Error("scene " + scene.scene_id + "/" + scene.method_id + " has " + std::to_string(n) +
                " views; max_views is " + std::to_string(impl_->config.max_views));
  }
  Clip clip;
  for (int i : subsample_indices(n, std::min(n, impl_->config.max_views))) clip.push_back(scene.views[i].pixels);
  return extract(clip);
}

std::vector<int> subsample_indices(int total, int count) {
  std::vector<int> out;
  if (count <= 0) return out;
  for (int i = 0; i < count; ++i) {
    out.push_back(static_cast<int>(static_cast<long long>(i) * total / count));
  }
  return out;
}

Representation extract(const fs::path& checkpoint, const Scene& scene) {
  return FrozenModel(checkpoint).extract(scene);
}

double RegressionModel::predict(std::span<const double> repr) const {
  if (repr.size() != coefficients.size()) {
    throw Error("representation dimension " + std::to_string(repr.size()) + " does not match model dimension " +
                std::to_string(coefficients.size()));
  }
  double y = intercept;
  for (std::size_t i = 0; i < repr.size(); ++i) y += coefficients[i] * repr[i];
  return y;
}

double predict(const RegressionModel& model, std::span<const double> repr) { return model.predict(repr); }

RegressionModel fit_keys(const RepresentationMap& representations, const std::map<SceneKey, double>& labels,
                         const std::vector<SceneKey>& keys, double alpha) {
  if (alpha < 0.0) throw ConfigError("ridge alpha must be >= 0");
  if (keys.size() < 3) throw Error("regression needs >= 3 training keys, got " + std::to_string(keys.size()));
  const auto n = static_cast<Eigen::Index>(keys.size());
  const auto d = static_cast<Eigen::Index>(representations.at(keys.front()).size());
  if (alpha == 0.0 && n < std::max<Eigen::Index>(1, d / 4)) {
    throw Error("unregularized regression needs >= D/4 training keys; set alpha > 0");
  }
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& key = keys[static_cast<std::size_t>(i)];
    auto r = representations.find(key);
    auto l = labels.find(key);
    if (r == representations.end()) throw KeyNotFound("no representation for " + key.str());
    if (l == labels.end()) throw KeyNotFound("no label for " + key.str());
    if (static_cast<Eigen::Index>(r->second.size()) != d) throw Error("representation dimensions differ");
    x.row(i) = Eigen::Map<const Eigen::RowVectorXd>(r->second.data(), d);
    y(i) = l->second;
  }
  // Center so the intercept is unpenalized and scale each column to unit
  // standard deviation so alpha does not depend on the representation scale.
  // Then solve [Z; sqrt(alpha) I] w = [y; 0] by column-pivoted QR.
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  Eigen::MatrixXd z = x.rowwise() - x_mean;
  Eigen::VectorXd scale(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n));
    scale(j) = sd > 0.0 ? sd : 1.0;
    z.col(j) /= scale(j);
  }
  Eigen::MatrixXd a(n + (alpha > 0.0 ? d : 0), d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(a.rows());
  a.topRows(n) = z;
  b.head(n) = y.array() - y_mean;
  if (alpha > 0.0) a.bottomRows(d) = std::sqrt(alpha) * Eigen::MatrixXd::Identity(d, d);
  const Eigen::VectorXd w = (a.colPivHouseholderQr().solve(b).array() / scale.array()).matrix();

  RegressionModel model;
  model.coefficients.assign(w.data(), w.data() + d);
  model.intercept = y_mean - x_mean.dot(w);
  model.alpha = alpha;
  model.fitted_on = keys;
  return model;
}

std::pair<std::vector<SceneKey>, std::vector<SceneKey>> split_keys(std::vector<SceneKey> keys, std::uint64_t seed,
                                                                   double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split_fraction must lie in (0, 1)");
  std::sort(keys.begin(), keys.end());
  Rng rng(seed);
  for (std::size_t i = keys.size(); i > 1; --i) std::swap(keys[i - 1], keys[rng.below(i)]);
  const auto n_train = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(keys.size())));
  std::vector<SceneKey> train(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<SceneKey> test(keys.begin() + static_cast<std::ptrdiff_t>(n_train), keys.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

FitResult fit(const RepresentationMap& representations, const std::map<SceneKey, double>& labels,
              std::uint64_t split_seed, double split_fraction, double alpha) {
  std::vector<SceneKey> keys;
  for (const auto& [key, value] : labels) {
    if (representations.count(key)) keys.push_back(key);
  }
  auto [train, test] = split_keys(keys, split_seed, split_fraction);
  FitResult out{fit_keys(representations, labels, train, alpha), std::move(test)};
  out.model.split = {{"protocol", "half_split"}, {"seed", split_seed}, {"fraction", split_fraction}};
  return out;
}

FitResult cross_dataset_fit(const RepresentationMap& representations, const std::map<SceneKey, double>& labels,
                            const std::map<SceneKey, std::string>& dataset_of,
                            const std::set<std::string>& train_ids, const std::string& test_id, double alpha) {
  if (train_ids.empty()) throw ConfigError("cross-dataset protocol needs at least one training dataset");
  if (train_ids.count(test_id)) throw ConfigError("test dataset '" + test_id + "' is also a training dataset");
  std::vector<SceneKey> train, test;
  for (const auto& [key, value] : labels) {
    if (!representations.count(key)) continue;
    auto d = dataset_of.find(key);
    if (d == dataset_of.end()) continue;
    if (train_ids.count(d->second)) train.push_back(key);
    if (d->second == test_id) test.push_back(key);
  }
  if (test.empty()) throw Error("no labeled keys for test dataset '" + test_id + "'");
  FitResult out{fit_keys(representations, labels, train, alpha), std::move(test)};
  out.model.split = {{"protocol", "cross_dataset"},
                     {"train_datasets", std::vector<std::string>(train_ids.begin(), train_ids.end())},
                     {"test_dataset", test_id}};
  return out;
}

void to_json(json& j, const RegressionModel& m) {
  json keys = json::array();
  for (const auto& k : m.fitted_on) keys.push_back({k.scene, k.method});
  j = json{{"coefficients", m.coefficients}, {"intercept", m.intercept}, {"alpha", m.alpha},
           {"fitted_on", keys}, {"split", m.split}};
}

void from_json(const json& j, RegressionModel& m) {
  m.coefficients = j.at("coefficients").get<std::vector<double>>();
  m.intercept = j.at("intercept").get<double>();
  m.alpha = j.value("alpha", 0.0);
  m.fitted_on.clear();
  for (const auto& k : j.value("fitted_on", json::array())) m.fitted_on.push_back({k.at(0), k.at(1)});
  m.split = j.value("split", json::object());
}

RepresentationCache::RepresentationCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path RepresentationCache::stem(const SceneKey& key) const { return dir_ / (key.scene + "__" + key.method); }

std::optional<Representation> RepresentationCache::get(const SceneKey& key, const std::string& hash) const {
  auto base = stem(key);
  std::ifstream sidecar(fs::path(base).concat(".json"));
  if (!sidecar) return std::nullopt;
  json meta;
  try {
    meta = json::parse(sidecar);
  } catch (const json::exception&) {
    return std::nullopt;
  }
  if (meta.value("checkpoint_sha256", "") != hash) return std::nullopt;
  const auto dim = meta.value("dim", std::size_t{0});
  std::ifstream bin(fs::path(base).concat(".bin"), std::ios::binary);
  Representation repr(dim);
  bin.read(reinterpret_cast<char*>(repr.data()), static_cast<std::streamsize>(dim * sizeof(double)));
  if (!bin || bin.gcount() != static_cast<std::streamsize>(dim * sizeof(double))) return std::nullopt;
  return repr;
}

void RepresentationCache::put(const SceneKey& key, const std::string& hash, const Representation& repr) const {
  auto base = stem(key);
  {
    std::ofstream bin(fs::path(base).concat(".bin"), std::ios::binary | std::ios::trunc);
    bin.write(reinterpret_cast<const char*>(repr.data()), static_cast<std::streamsize>(repr.size() * sizeof(double)));
  }
  std::ofstream sidecar(fs::path(base).concat(".json"), std::ios::trunc);
  sidecar << json{{"checkpoint_sha256", hash}, {"scene", key.scene}, {"method", key.method}, {"dim", repr.size()}}.dump()
          << '\n';
}

RepresentationMap extract_all(const FrozenModel& model, const DatasetIndex& index, const std::vector<SceneKey>& keys,
                              const RepresentationCache* cache) {
  RepresentationMap out;
  for (const auto& key : keys) {
    if (cache) {
      if (auto hit = cache->get(key, model.checkpoint_hash())) {
        out[key] = std::move(*hit);
        continue;
      }
    }
    auto repr = model.extract(load_scene(index, key.scene, key.method));
    if (cache) cache->put(key, model.checkpoint_hash(), repr);
    out[key] = std::move(repr);
  }
  return out;
}

}  // namespace scenequal
