#include "scenequal/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "scenequal/backbone.hpp"
#include "scenequal/error.hpp"
#include "scenequal/json_util.hpp"
#include "scenequal/log.hpp"
#include "torch_state.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scenequal {

// ---------------------------------------------------------------------------
// TrainConfig

std::string_view to_string(ObjectiveKind kind) { return kind == ObjectiveKind::mbw ? "mbw" : "aqb"; }

ObjectiveKind objective_from_string(std::string_view name) {
  if (name == "mbw" || name == "MBW") return ObjectiveKind::mbw;
  if (name == "aqb" || name == "AQB") return ObjectiveKind::aqb;
  throw ConfigError("unknown objective '" + std::string(name) + "' (expected mbw or aqb)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (pairs_per_epoch < 1) throw ConfigError("train.pairs_per_epoch must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) throw ConfigError("train.grad_clip_norm must be > 0");
  if (calibration_pairs < 100) throw ConfigError("train.calibration_pairs must be >= 100");
  if (fixed_pairs < 0) throw ConfigError("train.fixed_pairs must be >= 0");
  if (objective == ObjectiveKind::mbw) weights.validate();
  prep.validate();
  backbone.validate();
}

int TrainConfig::steps_per_epoch() const { return (pairs_per_epoch + batch_size - 1) / batch_size; }

std::vector<std::string> TrainConfig::resume_differences(const TrainConfig& other) const {
  std::vector<std::string> out = backbone.differences(other.backbone);
  const json a = *this;
  const json b = other;
  for (const char* key : {"batch_size", "learning_rate", "pairs_per_epoch", "objective", "weights", "seed",
                          "grad_clip_norm", "calibration_pairs", "fixed_pairs", "rep_target_noise", "prep"}) {
    if (a.at(key) != b.at(key)) out.push_back(std::string("train.") + key + ": " + a.at(key).dump() + " != " + b.at(key).dump());
  }
  return out;
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"pairs_per_epoch", c.pairs_per_epoch},
           {"objective", to_string(c.objective)},
           {"weights", {c.weights.iqa, c.weights.vqa, c.weights.rep}},
           {"seed", c.seed},
           {"checkpoint_every", c.checkpoint_every},
           {"grad_clip_norm", c.grad_clip_norm ? json(*c.grad_clip_norm) : json(nullptr)},
           {"calibration_pairs", c.calibration_pairs},
           {"fixed_pairs", c.fixed_pairs},
           {"rep_target_noise", c.rep_target_noise},
           {"prep", c.prep},
           {"backbone", c.backbone},
           {"out_dir", c.out_dir.string()}};
}

void from_json(const json& j, TrainConfig& c) {
  check_keys(j,
             {"epochs", "batch_size", "learning_rate", "pairs_per_epoch", "objective", "weights", "seed",
              "checkpoint_every", "grad_clip_norm", "calibration_pairs", "fixed_pairs", "rep_target_noise",
              "prep", "backbone", "out_dir"},
             "train");
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.pairs_per_epoch = j.value("pairs_per_epoch", c.pairs_per_epoch);
  if (j.contains("objective")) c.objective = objective_from_string(j.at("objective").get<std::string>());
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    if (w.is_array()) {
      if (w.size() != 3) throw ConfigError("train.weights needs three values (iqa, vqa, rep)");
      c.weights = {w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()};
    } else {
      check_keys(w, {"iqa", "vqa", "rep"}, "train.weights");
      c.weights = {w.value("iqa", c.weights.iqa), w.value("vqa", c.weights.vqa), w.value("rep", c.weights.rep)};
    }
  }
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  if (j.contains("grad_clip_norm")) {
    c.grad_clip_norm = j.at("grad_clip_norm").is_null() ? std::nullopt
                                                         : std::optional<double>(j.at("grad_clip_norm").get<double>());
  }
  c.calibration_pairs = j.value("calibration_pairs", c.calibration_pairs);
  c.fixed_pairs = j.value("fixed_pairs", c.fixed_pairs);
  c.rep_target_noise = j.value("rep_target_noise", c.rep_target_noise);
  if (j.contains("prep")) from_json(j.at("prep"), c.prep);
  if (j.contains("backbone")) from_json(j.at("backbone"), c.backbone);
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

constexpr std::uint64_t kCalibrationStream = 1;
constexpr std::uint64_t kPairStream = 2;
constexpr std::uint64_t kPoolStream = 3;
constexpr std::uint64_t kRepNoiseStream = 4;

struct PreparedPair {
  ContrastivePair pair;
  GuidanceVector targets;
};

std::string format_row(std::int64_t step, const LossBreakdown& loss) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", static_cast<long long>(step),
                loss.total, loss.per_branch[0], loss.per_branch[1], loss.per_branch[2], loss.sigmas[0],
                loss.sigmas[1], loss.sigmas[2]);
  return buf;
}

bool finite(const LossBreakdown& loss) {
  if (!std::isfinite(loss.total)) return false;
  for (double v : loss.per_branch) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

struct Trainer::Impl {
  const DatasetIndex* index = nullptr;
  TrainConfig config;
  SceneCache cache;
  GuidanceBounds bounds;
  SceneNet net{nullptr};
  torch::Tensor log_sigma;
  std::unique_ptr<torch::optim::Adam> optimizer;
  std::vector<torch::Tensor> net_params;
  std::vector<std::string> net_param_names;
  Rng rng;
  std::int64_t step = 0;
  std::vector<PairRecipe> pool;
  std::unique_ptr<std::ofstream> log;

  Impl(const DatasetIndex& idx, const TrainConfig& cfg) : index(&idx), config(cfg), cache(idx) {}

  void build_model(std::uint64_t init_seed) {
    net = make_scene_net(config.backbone, init_seed);
    log_sigma = torch::zeros({static_cast<std::int64_t>(kBranchCount)}, torch::kFloat64).requires_grad_(true);
    for (const auto& p : net->named_parameters()) {
      net_param_names.push_back(p.key());
      net_params.push_back(p.value());
    }
    std::vector<torch::optim::OptimizerParamGroup> groups;
    groups.emplace_back(net_params);
    groups.emplace_back(std::vector<torch::Tensor>{log_sigma});
    optimizer = std::make_unique<torch::optim::Adam>(
        groups, torch::optim::AdamOptions(config.learning_rate).betas({0.9, 0.999}).eps(1e-8));
    if (config.fixed_pairs > 0) {
      Rng pool_rng(mix_seed(config.seed, kPoolStream));
      for (int i = 0; i < config.fixed_pairs; ++i) pool.push_back(sample_recipe(*index, pool_rng, config.prep));
    }
  }

  void calibrate() {
    Rng cal_rng(mix_seed(config.seed, kCalibrationStream));
    std::vector<double> iqa, vqa;
    for (int i = 0; i < config.calibration_pairs; ++i) {
      const auto pair = realize_pair(cache, sample_recipe(*index, cal_rng, config.prep));
      const auto raw = raw_guidance(pair);
      iqa.push_back(raw.iqa);
      vqa.push_back(raw.vqa);
    }
    bounds.iqa = calibrate_bounds(iqa);
    bounds.vqa = calibrate_bounds(vqa);
    bounds.rep = {0.0, 0.5};
  }

  int batch_size_at(std::int64_t s) const {
    const int spe = config.steps_per_epoch();
    const auto k = s % spe;
    return k == spe - 1 ? config.pairs_per_epoch - (spe - 1) * config.batch_size : config.batch_size;
  }

  std::int64_t pairs_before(std::int64_t s) const {
    const int spe = config.steps_per_epoch();
    return (s / spe) * config.pairs_per_epoch + (s % spe) * config.batch_size;
  }

  std::vector<PairRecipe> draw_recipes(Rng& source, std::int64_t s) const {
    const int n = batch_size_at(s);
    std::vector<PairRecipe> out;
    out.reserve(n);
    if (!pool.empty()) {
      const auto first = pairs_before(s);
      for (int i = 0; i < n; ++i) out.push_back(pool[static_cast<std::size_t>((first + i) % pool.size())]);
    } else {
      for (int i = 0; i < n; ++i) out.push_back(sample_recipe(*index, source, config.prep));
    }
    return out;
  }

  std::vector<PreparedPair> prepare(const std::vector<PairRecipe>& recipes, std::int64_t s) {
    std::vector<PreparedPair> out;
    out.reserve(recipes.size());
    const auto first = pairs_before(s);
    for (std::size_t i = 0; i < recipes.size(); ++i) {
      PreparedPair p{realize_pair(cache, recipes[i]), {}};
      p.targets = compute_guidance(p.pair, bounds);
      if (config.rep_target_noise) {
        Rng noise(mix_seed(mix_seed(config.seed, kRepNoiseStream), static_cast<std::uint64_t>(first) + i));
        p.targets.rep = noise.uniform(-1.0, 1.0);
      }
      out.push_back(std::move(p));
    }
    return out;
  }

  void abort_nonfinite(const std::vector<PairRecipe>& recipes) {
    fs::create_directories(config.out_dir);
    const auto path = config.out_dir / "nonfinite_batch.jsonl";
    write_pair_manifest(path, recipes);
    throw Error("non-finite loss at step " + std::to_string(step + 1) + "; batch recipes written to " +
                path.string());
  }

  StepReport take_step() {
    const auto recipes = draw_recipes(rng, step);
    auto prepared = prepare(recipes, step);
    const double n_total = static_cast<double>(prepared.size());

    // Group same-shape pairs into micro-batches.
    std::map<std::tuple<std::size_t, int, int>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      const auto& s1 = prepared[i].pair.s1;
      groups[{s1.size(), s1.front().height, s1.front().width}].push_back(i);
    }

    NoiseParams noise;
    {
      auto ls = log_sigma.detach();
      for (std::size_t b = 0; b < kBranchCount; ++b) noise.log_sigma[b] = ls[b].item<double>();
    }

    optimizer->zero_grad();
    LossBreakdown total;
    total.sigmas = {1.0, 1.0, 1.0};
    PerBranch<double> log_sigma_grad{0.0, 0.0, 0.0};
    for (const auto& [shape, members] : groups) {
      const auto g = static_cast<std::int64_t>(members.size());
      std::vector<torch::Tensor> clips;
      clips.reserve(2 * members.size());
      for (auto i : members) clips.push_back(clip_to_tensor(prepared[i].pair.s1));
      for (auto i : members) clips.push_back(clip_to_tensor(prepared[i].pair.s2));
      const auto repr = net->represent(torch::stack(clips));

      std::vector<torch::Tensor> outputs;
      std::vector<torch::Tensor> projections_d;
      for (Branch b : kBranches) {
        outputs.push_back(net->project(repr, b));
        projections_d.push_back(outputs.back().detach().to(torch::kFloat64).contiguous());
      }
      std::vector<PairProjections> batch(members.size());
      const auto dim = outputs.front().size(1);
      for (std::int64_t k = 0; k < g; ++k) {
        for (Branch b : kBranches) {
          const double* data = projections_d[index_of(b)].data_ptr<double>();
          batch[k].first[index_of(b)].assign(data + k * dim, data + (k + 1) * dim);
          batch[k].second[index_of(b)].assign(data + (g + k) * dim, data + (g + k + 1) * dim);
        }
        batch[k].targets = prepared[members[k]].targets;
      }

      ObjectiveGradient grad;
      const LossBreakdown part = config.objective == ObjectiveKind::aqb
                                     ? aqb_total(batch, noise, &grad)
                                     : mbw_batch(batch, config.weights, &grad);
      const double share = static_cast<double>(g) / n_total;
      if (!finite(part)) abort_nonfinite(recipes);
      total.total += share * part.total;
      for (std::size_t b = 0; b < kBranchCount; ++b) {
        total.per_branch[b] += share * part.per_branch[b];
        log_sigma_grad[b] += share * grad.log_sigma[b];
      }
      if (config.objective == ObjectiveKind::aqb) total.sigmas = part.sigmas;

      std::vector<torch::Tensor> grads;
      for (Branch b : kBranches) {
        auto gt = torch::empty({2 * g, dim}, torch::kFloat64);
        double* out = gt.data_ptr<double>();
        for (std::int64_t k = 0; k < g; ++k) {
          const auto& g1 = grad.first[k][index_of(b)];
          const auto& g2 = grad.second[k][index_of(b)];
          for (std::int64_t d = 0; d < dim; ++d) {
            out[k * dim + d] = share * g1[d];
            out[(g + k) * dim + d] = share * g2[d];
          }
        }
        grads.push_back(gt.to(torch::kFloat32));
      }
      torch::autograd::backward(outputs, grads);
    }

    if (config.objective == ObjectiveKind::aqb) {
      log_sigma.mutable_grad() = torch::tensor(std::vector<double>(log_sigma_grad.begin(), log_sigma_grad.end()),
                                               torch::kFloat64);
    }
    if (config.grad_clip_norm) torch::nn::utils::clip_grad_norm_(net_params, *config.grad_clip_norm);
    optimizer->step();
    ++step;

    StepReport report{step, total};
    if (log) *log << format_row(step, total) << '\n' << std::flush;
    return report;
  }

  CheckpointData snapshot() const {
    CheckpointData data;
    json optim_steps = json::object();
    data.tensors = detail::module_records(*net);
    data.tensors.push_back(detail::to_record("noise.log_sigma", log_sigma.to(torch::kFloat32)));
    const auto& state = optimizer->state();
    auto save_state = [&](const std::string& name, const torch::Tensor& p) {
      auto it = state.find(p.unsafeGetTensorImpl());
      if (it == state.end()) return;
      const auto& st = static_cast<const torch::optim::AdamParamState&>(*it->second);
      optim_steps[name] = st.step();
      data.tensors.push_back(detail::to_record("optim." + name + ".exp_avg", st.exp_avg()));
      data.tensors.push_back(detail::to_record("optim." + name + ".exp_avg_sq", st.exp_avg_sq()));
    };
    for (std::size_t i = 0; i < net_params.size(); ++i) save_state("model." + net_param_names[i], net_params[i]);
    save_state("noise.log_sigma", log_sigma);
    // log_sigma is float64 in memory; keep its exact value in the header too.
    json ls = json::array();
    {
      auto t = log_sigma.detach();
      for (std::size_t b = 0; b < kBranchCount; ++b) ls.push_back(t[b].item<double>());
    }
    json adam_ls = json::object();
    if (auto it = state.find(log_sigma.unsafeGetTensorImpl()); it != state.end()) {
      const auto& st = static_cast<const torch::optim::AdamParamState&>(*it->second);
      json m = json::array(), v = json::array();
      for (std::size_t b = 0; b < kBranchCount; ++b) {
        m.push_back(st.exp_avg()[b].item<double>());
        v.push_back(st.exp_avg_sq()[b].item<double>());
      }
      adam_ls = {{"exp_avg", m}, {"exp_avg_sq", v}};
    }
    data.meta = {{"backbone", config.backbone},
                 {"bounds", bounds},
                 {"train", config},
                 {"step", step},
                 {"epoch", step / config.steps_per_epoch()},
                 {"rng", rng.serialize()},
                 {"log_sigma", ls},
                 {"log_sigma_adam", adam_ls},
                 {"optim_steps", optim_steps}};
    return data;
  }

  void restore(const CheckpointData& data) {
    detail::load_module(*net, data);
    torch::NoGradGuard guard;
    const auto& ls = data.meta.at("log_sigma");
    for (std::size_t b = 0; b < kBranchCount; ++b) log_sigma[b] = ls.at(b).get<double>();
    auto& state = optimizer->state();
    const auto& steps = data.meta.at("optim_steps");
    auto load_state = [&](const std::string& name, const torch::Tensor& p) {
      if (!steps.contains(name)) return;
      auto st = std::make_unique<torch::optim::AdamParamState>();
      st->step(steps.at(name).get<std::int64_t>());
      if (name == "noise.log_sigma") {
        const auto& adam = data.meta.at("log_sigma_adam");
        st->exp_avg(torch::tensor(adam.at("exp_avg").get<std::vector<double>>(), torch::kFloat64));
        st->exp_avg_sq(torch::tensor(adam.at("exp_avg_sq").get<std::vector<double>>(), torch::kFloat64));
      } else {
        st->exp_avg(detail::to_tensor(data.at("optim." + name + ".exp_avg")));
        st->exp_avg_sq(detail::to_tensor(data.at("optim." + name + ".exp_avg_sq")));
      }
      state[p.unsafeGetTensorImpl()] = std::move(st);
    };
    for (std::size_t i = 0; i < net_params.size(); ++i) load_state("model." + net_param_names[i], net_params[i]);
    load_state("noise.log_sigma", log_sigma);
    step = data.meta.at("step").get<std::int64_t>();
    rng.deserialize(data.meta.at("rng").get<std::string>());
  }
};

Trainer::Trainer(const DatasetIndex& index, const TrainConfig& config)
    : impl_(std::make_unique<Impl>(index, config)) {
  config.validate();
  impl_->rng = Rng(mix_seed(config.seed, kPairStream));
  impl_->build_model(config.seed);
  impl_->calibrate();
}

Trainer::Trainer(const DatasetIndex& index, const fs::path& checkpoint, const TrainConfig* expected) {
  const CheckpointData data = read_checkpoint(checkpoint);
  TrainConfig stored;
  try {
    from_json(data.meta.at("train"), stored);
  } catch (const json::exception& e) {
    throw FormatError("checkpoint " + checkpoint.string() + " has no readable training config: " + e.what());
  }
  if (expected) {
    const auto diffs = expected->resume_differences(stored);
    if (!diffs.empty()) {
      std::string msg = "checkpoint does not match the requested configuration:";
      for (const auto& d : diffs) msg += "\n  " + d;
      throw ConfigError(msg);
    }
    stored.epochs = expected->epochs;
    stored.checkpoint_every = expected->checkpoint_every;
    stored.out_dir = expected->out_dir;
  }
  // Build everything into a fresh Impl so a failed restore leaves no partial state.
  auto impl = std::make_unique<Impl>(index, stored);
  impl->build_model(stored.seed);
  impl->bounds = data.meta.at("bounds").get<GuidanceBounds>();
  impl->restore(data);
  impl_ = std::move(impl);
}

Trainer::~Trainer() = default;
Trainer::Trainer(Trainer&&) noexcept = default;
Trainer& Trainer::operator=(Trainer&&) noexcept = default;

StepReport Trainer::step() { return impl_->take_step(); }

std::vector<StepReport> Trainer::run_steps(std::int64_t count) {
  std::vector<StepReport> out;
  out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(count, 0)));
  for (std::int64_t i = 0; i < count; ++i) out.push_back(step());
  return out;
}

std::int64_t Trainer::global_step() const { return impl_->step; }
const TrainConfig& Trainer::config() const { return impl_->config; }
const GuidanceBounds& Trainer::bounds() const { return impl_->bounds; }

NoiseParams Trainer::noise() const {
  NoiseParams out;
  auto t = impl_->log_sigma.detach();
  for (std::size_t b = 0; b < kBranchCount; ++b) out.log_sigma[b] = t[b].item<double>();
  return out;
}

std::vector<PairRecipe> Trainer::peek_next_recipes() const {
  Rng copy = impl_->rng;
  return impl_->draw_recipes(copy, impl_->step);
}

std::vector<float> Trainer::flat_weights() const {
  std::vector<float> out;
  for (const auto& rec : detail::module_records(*impl_->net)) out.insert(out.end(), rec.data.begin(), rec.data.end());
  return out;
}

void Trainer::save(const fs::path& path) const { write_checkpoint(path, impl_->snapshot()); }

void Trainer::log_to(const fs::path& csv_path) {
  const bool fresh = !fs::exists(csv_path) || fs::file_size(csv_path) == 0;
  if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
  impl_->log = std::make_unique<std::ofstream>(csv_path, std::ios::app);
  if (!*impl_->log) throw Error("cannot open training log " + csv_path.string());
  if (fresh) *impl_->log << kTrainLogHeader << '\n';
}

namespace {

fs::path run_until(Trainer& trainer, std::int64_t target_step, const fs::path& out_dir) {
  const auto& cfg = trainer.config();
  const int spe = cfg.steps_per_epoch();
  double epoch_sum = 0.0;
  int epoch_steps = 0;
  while (trainer.global_step() < target_step) {
    const auto report = trainer.step();
    epoch_sum += report.loss.total;
    ++epoch_steps;
    if (cfg.checkpoint_every > 0 && report.step % cfg.checkpoint_every == 0) {
      trainer.save(out_dir / ("ckpt_" + std::to_string(report.step)));
    }
    if (report.step % spe == 0) {
      log::info("epoch " + std::to_string(report.step / spe) + " mean loss " +
                std::to_string(epoch_sum / epoch_steps));
      epoch_sum = 0.0;
      epoch_steps = 0;
    }
  }
  const auto final_path = out_dir / "ckpt_final";
  trainer.save(final_path);
  return final_path;
}

}  // namespace

fs::path train(const DatasetIndex& index, const TrainConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);
  const auto log_path = config.out_dir / "train_log.csv";
  fs::remove(log_path);
  Trainer trainer(index, config);
  trainer.log_to(log_path);
  std::string what = "training " + std::string(to_string(config.objective));
  if (config.objective == ObjectiveKind::mbw) {
    std::ostringstream w;
    w << " with weights " << config.weights.iqa << ',' << config.weights.vqa << ',' << config.weights.rep;
    what += w.str();
  }
  log::info(what + " for " + std::to_string(config.epochs) + " epochs x " + std::to_string(config.steps_per_epoch()) +
            " steps");
  return run_until(trainer, static_cast<std::int64_t>(config.epochs) * config.steps_per_epoch(), config.out_dir);
}

fs::path resume(const fs::path& checkpoint, const DatasetIndex& index, int extra_epochs,
                const std::optional<fs::path>& out_dir, const TrainConfig* expected) {
  if (extra_epochs < 0) throw ConfigError("extra_epochs must be >= 0");
  Trainer trainer(index, checkpoint, expected);
  const fs::path dir = out_dir ? *out_dir : (checkpoint.has_parent_path() ? checkpoint.parent_path() : fs::path("."));
  fs::create_directories(dir);
  trainer.log_to(dir / "train_log.csv");
  const auto target = trainer.global_step() + static_cast<std::int64_t>(extra_epochs) * trainer.config().steps_per_epoch();
  return run_until(trainer, target, dir);
}

}  // namespace scenequal
