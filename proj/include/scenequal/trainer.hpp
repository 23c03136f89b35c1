#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenequal/backbone_config.hpp"
#include "scenequal/guidance.hpp"
#include "scenequal/objective.hpp"
#include "scenequal/pair_prep.hpp"
#include "scenequal/scene_io.hpp"

namespace scenequal {

enum class ObjectiveKind { mbw, aqb };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind objective_from_string(std::string_view name);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double learning_rate = 1e-4;
  int pairs_per_epoch = 2000;
  ObjectiveKind objective = ObjectiveKind::aqb;
  BranchWeights weights;  // MBW only
  std::uint64_t seed = 0;
  // Save `ckpt_<step>` every this many steps; 0 disables periodic saves.
  int checkpoint_every = 0;
  std::optional<double> grad_clip_norm = 5.0;
  // Pairs drawn to calibrate the IQA/VQA rescale bounds.
  int calibration_pairs = 200;
  // When > 0, a fixed pool of this many recipes is cycled instead of fresh pairs.
  int fixed_pairs = 0;
  // Replaces REP targets by uniform noise in [-1, 1] (diagnostic runs).
  bool rep_target_noise = false;
  PrepConfig prep;
  BackboneConfig backbone;
  std::filesystem::path out_dir = "run";

  void validate() const;
  int steps_per_epoch() const;
  // Fields that must agree for a checkpoint to be resumed under this config.
  std::vector<std::string> resume_differences(const TrainConfig& other) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Reads known keys over the defaults already in `c`; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct StepReport {
  std::int64_t step = 0;  // 1-based index of the step just taken
  LossBreakdown loss;
};

// Owns model, noise parameters, optimizer and pair stream.
class Trainer {
 public:
  Trainer(const DatasetIndex& index, const TrainConfig& config);
  // Restores full training state. When `expected` is given, architecture and
  // optimization fields must match the checkpoint or ConfigError lists them.
  Trainer(const DatasetIndex& index, const std::filesystem::path& checkpoint,
          const TrainConfig* expected = nullptr);
  ~Trainer();
  Trainer(Trainer&&) noexcept;
  Trainer& operator=(Trainer&&) noexcept;

  StepReport step();
  std::vector<StepReport> run_steps(std::int64_t count);

  std::int64_t global_step() const;
  const TrainConfig& config() const;
  const GuidanceBounds& bounds() const;
  NoiseParams noise() const;

  // Recipes consumed by the next step (without advancing any state).
  std::vector<PairRecipe> peek_next_recipes() const;

  // Model weights concatenated in canonical-name order.
  std::vector<float> flat_weights() const;

  void save(const std::filesystem::path& path) const;

  // Appends every subsequent step as a CSV row (header written if the file is new).
  void log_to(const std::filesystem::path& csv_path);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

inline constexpr const char* kTrainLogHeader =
    "step,total,iqa,vqa,rep,sigma_iqa,sigma_vqa,sigma_rep";

// Full run: writes train_log.csv, periodic ckpt_<step> and ckpt_final under
// config.out_dir. Returns the final checkpoint path.
std::filesystem::path train(const DatasetIndex& index, const TrainConfig& config);

// Continues a run for extra_epochs epochs. Output goes to out_dir (defaults
// to the checkpoint's directory). Returns the new final checkpoint path.
std::filesystem::path resume(const std::filesystem::path& checkpoint, const DatasetIndex& index,
                             int extra_epochs,
                             const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                             const TrainConfig* expected = nullptr);

}  // namespace scenequal
