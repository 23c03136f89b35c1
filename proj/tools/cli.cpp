#include "scenequal/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "scenequal/backbone.hpp"
#include "scenequal/checkpoint.hpp"
#include "scenequal/error.hpp"
#include "scenequal/json_util.hpp"
#include "scenequal/log.hpp"
#include "scenequal/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scenequal {

namespace {

std::optional<fs::path> optional_path(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return fs::path(j.at(key).get<std::string>());
}

json path_or_null(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

json RunConfig::to_json() const {
  json train_j = train;
  const json prep = train_j.at("prep"), backbone = train_j.at("backbone");
  const int calibration = train.calibration_pairs;
  train_j.erase("prep");
  train_j.erase("backbone");
  train_j.erase("calibration_pairs");
  return json{{"data", {{"root", data.root.string()},
                        {"manifest", path_or_null(data.manifest)},
                        {"labels", path_or_null(data.labels)}}},
              {"prep", prep},
              {"guidance", {{"calibration_pairs", calibration}}},
              {"backbone", backbone},
              {"train", train_j},
              {"eval", {{"protocol", eval.protocol},
                        {"split_seed", eval.split_seed},
                        {"split_fraction", eval.split_fraction},
                        {"alpha", eval.alpha},
                        {"train_datasets", eval.train_datasets},
                        {"test_dataset", eval.test_dataset},
                        {"out_dir", eval.out_dir.string()},
                        {"cache_dir", path_or_null(eval.cache_dir)}}},
              {"synth", synth}};
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

RunConfig parse_run_config(const json& j) {
  check_keys(j, {"data", "prep", "guidance", "backbone", "train", "eval", "synth"}, "");
  RunConfig c;
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, {"root", "manifest", "labels"}, "data");
    c.data.root = d.value("root", std::string());
    c.data.manifest = optional_path(d, "manifest");
    c.data.labels = optional_path(d, "labels");
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t,
               {"epochs", "batch_size", "learning_rate", "pairs_per_epoch", "objective", "weights", "seed",
                "checkpoint_every", "grad_clip_norm", "fixed_pairs", "rep_target_noise", "out_dir"},
               "train");
    from_json(t, c.train);
  }
  if (j.contains("prep")) from_json(j.at("prep"), c.train.prep);
  if (j.contains("backbone")) from_json(j.at("backbone"), c.train.backbone);
  if (j.contains("guidance")) {
    const auto& g = j.at("guidance");
    check_keys(g, {"calibration_pairs"}, "guidance");
    c.train.calibration_pairs = g.value("calibration_pairs", c.train.calibration_pairs);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_keys(e,
               {"protocol", "split_seed", "split_fraction", "alpha", "train_datasets", "test_dataset", "out_dir",
                "cache_dir"},
               "eval");
    c.eval.protocol = e.value("protocol", c.eval.protocol);
    c.eval.split_seed = e.value("split_seed", c.eval.split_seed);
    c.eval.split_fraction = e.value("split_fraction", c.eval.split_fraction);
    c.eval.alpha = e.value("alpha", c.eval.alpha);
    c.eval.train_datasets = e.value("train_datasets", c.eval.train_datasets);
    c.eval.test_dataset = e.value("test_dataset", c.eval.test_dataset);
    c.eval.out_dir = e.value("out_dir", c.eval.out_dir.string());
    c.eval.cache_dir = optional_path(e, "cache_dir");
  }
  if (j.contains("synth")) from_json(j.at("synth"), c.synth);
  c.train.validate();
  c.synth.validate();
  if (c.eval.protocol != "half_split" && c.eval.protocol != "cross_dataset") {
    throw ConfigError("eval.protocol must be half_split or cross_dataset");
  }
  if (!(c.eval.split_fraction > 0.0 && c.eval.split_fraction < 1.0)) {
    throw ConfigError("eval.split_fraction must be in (0, 1)");
  }
  if (!(c.eval.alpha >= 0.0)) throw ConfigError("eval.alpha must be >= 0");
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    return parse_run_config(j);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

DatasetIndex load_run_dataset(const DataConfig& data) {
  if (data.root.empty() && !data.manifest) throw ConfigError("data.root (or --data) is required");
  DatasetIndex index = load_dataset(data.root, data.manifest);
  if (data.labels) {
    index.labels.clear();
    index.datasets.clear();
    attach_labels(index, read_labels(*data.labels));
  }
  return index;
}

std::vector<PairRecipe> prepare_pairs(const DatasetIndex& index, const PrepConfig& prep, std::size_t count,
                                      std::uint64_t seed) {
  prep.validate();
  Rng rng(seed);
  std::vector<PairRecipe> recipes;
  recipes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) recipes.push_back(sample_recipe(index, rng, prep));
  return recipes;
}

EvaluationResult run_evaluation(const RunConfig& config, const fs::path& checkpoint) {
  return run_evaluation(config, load_run_dataset(config.data), checkpoint);
}

EvaluationResult run_evaluation(const RunConfig& config, const DatasetIndex& index, const fs::path& checkpoint) {
  const auto& ev = config.eval;
  if (index.labels.empty()) throw ConfigError("evaluation needs labels (data.labels or <root>/labels.json)");
  if (ev.protocol != "half_split" && ev.protocol != "cross_dataset") {
    throw ConfigError("unknown protocol '" + ev.protocol + "' (expected half_split or cross_dataset)");
  }

  std::set<std::string> dataset_ids;
  for (const auto& [key, id] : index.datasets) dataset_ids.insert(id);
  std::set<std::string> train_ids(ev.train_datasets.begin(), ev.train_datasets.end());
  if (ev.protocol == "cross_dataset") {
    if (dataset_ids.size() < 2) {
      throw ConfigError("cross_dataset protocol needs labels from at least 2 datasets; found " +
                        std::to_string(dataset_ids.size()));
    }
    if (ev.test_dataset.empty()) throw ConfigError("cross_dataset protocol needs eval.test_dataset");
    if (!dataset_ids.count(ev.test_dataset)) throw ConfigError("unknown test dataset '" + ev.test_dataset + "'");
    for (const auto& id : train_ids) {
      if (!dataset_ids.count(id)) throw ConfigError("unknown training dataset '" + id + "'");
    }
    if (train_ids.empty()) {
      for (const auto& id : dataset_ids) {
        if (id != ev.test_dataset) train_ids.insert(id);
      }
    }
  }

  const FrozenModel model(checkpoint);
  std::vector<SceneKey> keys;
  for (const auto& [key, label] : index.labels) keys.push_back(key);
  std::optional<RepresentationCache> cache;
  if (ev.cache_dir) cache.emplace(*ev.cache_dir);
  const auto reprs = extract_all(model, index, keys, cache ? &*cache : nullptr);

  EvaluationResult out;
  out.fit = ev.protocol == "half_split"
                ? fit(reprs, index.labels, ev.split_seed, ev.split_fraction, ev.alpha)
                : cross_dataset_fit(reprs, index.labels, index.datasets, train_ids, ev.test_dataset, ev.alpha);
  for (const auto& key : out.fit.held_out) {
    out.predictions[key] = out.fit.model.predict(reprs.at(key));
    out.labels[key] = index.labels.at(key);
  }
  out.report = scene_wise_report(out.predictions, out.labels);

  fs::create_directories(ev.out_dir);
  out.scatter = write_scatter_svg(ev.out_dir / "scatter.svg", out.predictions, out.labels,
                                  ev.protocol == "half_split" ? "half split: " : "cross dataset: ");
  write_text(ev.out_dir / "report.csv", out.report.to_csv());

  json per_scene = json::object();
  for (const auto& [scene, m] : out.report.per_scene) {
    per_scene[scene] = {{"srcc", m.srcc}, {"plcc", m.plcc}, {"krcc", m.krcc}, {"n", m.n_methods}};
  }
  json preds = json::array();
  for (const auto& [key, p] : out.predictions) {
    preds.push_back({{"scene", key.scene}, {"method", key.method}, {"prediction", p}, {"label", out.labels.at(key)}});
  }
  json fit_keys = json::array(), test_keys = json::array();
  for (const auto& k : out.fit.model.fitted_on) fit_keys.push_back({k.scene, k.method});
  for (const auto& k : out.fit.held_out) test_keys.push_back({k.scene, k.method});
  out.report_json = {{"config_hash", config.hash()},
                     {"checkpoint_sha256", model.checkpoint_hash()},
                     {"protocol", ev.protocol},
                     {"split", out.fit.model.split},
                     {"aggregate", out.report.aggregate_json()},
                     {"per_scene", per_scene},
                     {"positive_slope", {{"count", out.scatter.positive}, {"scenes", out.scatter.total}}},
                     {"fit_keys", fit_keys},
                     {"test_keys", test_keys},
                     {"predictions", preds}};
  write_text(ev.out_dir / "report.json", out.report_json.dump(2) + "\n");
  json model_j = out.fit.model;
  model_j["config_hash"] = config.hash();
  write_text(ev.out_dir / "model.json", model_j.dump(2) + "\n");
  return out;
}

json bt_scores(const std::map<std::string, PreferenceTable>& tables) {
  json out = json::object();
  for (const auto& [scene, table] : tables) {
    try {
      const auto result = bradley_terry(table);
      out[scene] = {{"scores", result.scores}, {"iterations", result.iterations}, {"converged", result.converged}};
    } catch (const Error& e) {
      throw Error("scene " + scene + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::string help_footer() {
  return "\nConfig file keys and defaults (JSON; unknown keys are rejected):\n" + RunConfig{}.to_json().dump(2) +
         "\n\nExit codes: 0 success, 1 runtime failure, 2 usage or configuration error.\n";
}

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_run_config(path); }

BranchWeights parse_weights(const std::string& s) {
  const auto parts = split_list(s);
  if (parts.size() != 3) throw ConfigError("--weights expects three comma-separated values (iqa,vqa,rep)");
  try {
    return {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
  } catch (const std::exception&) {
    throw ConfigError("--weights values must be numbers: '" + s + "'");
  }
}

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Self-supervised quality representations for synthesized multi-view scenes", "scenequal"};
  app.require_subcommand(1);
  app.footer(help_footer());
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress info logging");

  std::string config_path, data_root;

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Sample contrastive pair recipes into a JSON-lines manifest");
  std::string prep_out;
  std::size_t prep_count = 100;
  std::uint64_t prep_seed = 0;
  prepare->add_option("-c,--config", config_path, "Run config file");
  prepare->add_option("--data", data_root, "Dataset root (overrides data.root)");
  prepare->add_option("-o,--out", prep_out, "Output manifest (.jsonl)")->required();
  prepare->add_option("-n,--count", prep_count, "Number of recipes")->capture_default_str();
  prepare->add_option("-s,--seed", prep_seed, "Sampling seed")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Self-supervised training");
  std::string objective, weights, out_dir, resume_from;
  std::optional<int> epochs, extra_epochs;
  std::optional<std::uint64_t> train_seed;
  train_cmd->add_option("-c,--config", config_path, "Run config file");
  train_cmd->add_option("--data", data_root, "Dataset root (overrides data.root)");
  train_cmd->add_option("--objective", objective, "aqb or mbw (overrides train.objective)");
  train_cmd->add_option("--weights", weights, "MBW weights iqa,vqa,rep (overrides train.weights)");
  train_cmd->add_option("--epochs", epochs, "Overrides train.epochs");
  train_cmd->add_option("--seed", train_seed, "Overrides train.seed");
  train_cmd->add_option("-o,--out", out_dir, "Output directory (overrides train.out_dir)");
  train_cmd->add_option("--resume", resume_from, "Continue from this checkpoint");
  train_cmd->add_option("--extra-epochs", extra_epochs, "Epochs to add when resuming (default: train.epochs)");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Frozen extraction, regression and scene-wise correlation report");
  std::string checkpoint, labels, protocol, train_datasets, test_dataset, eval_out;
  std::optional<std::uint64_t> eval_seed;
  std::optional<double> alpha;
  eval_cmd->add_option("-c,--config", config_path, "Run config file");
  eval_cmd->add_option("--data", data_root, "Dataset root (overrides data.root)");
  eval_cmd->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  eval_cmd->add_option("--labels", labels, "Label file (overrides data.labels)");
  eval_cmd->add_option("--protocol", protocol, "half_split or cross_dataset (overrides eval.protocol)");
  eval_cmd->add_option("--seed", eval_seed, "Split seed (overrides eval.split_seed)");
  eval_cmd->add_option("--alpha", alpha, "Ridge strength (overrides eval.alpha)");
  eval_cmd->add_option("--train-datasets", train_datasets, "Comma-separated training dataset ids");
  eval_cmd->add_option("--test-dataset", test_dataset, "Test dataset id");
  eval_cmd->add_option("-o,--out", eval_out, "Report directory (overrides eval.out_dir)");

  // bt
  auto* bt_cmd = app.add_subcommand("bt", "Bradley-Terry scores from pairwise comparisons");
  std::string comparisons, bt_out;
  bt_cmd->add_option("--comparisons", comparisons, "CSV rows scene,winner_method,loser_method,count")->required();
  bt_cmd->add_option("-o,--out", bt_out, "Write scores JSON here instead of stdout");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Summarize a checkpoint, dataset or config");
  std::string inspect_ckpt;
  inspect->add_option("-c,--config", config_path, "Run config file (prints the resolved config and hash)");
  inspect->add_option("--data", data_root, "Dataset root");
  inspect->add_option("--checkpoint", inspect_ckpt, "Checkpoint file");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a procedural labeled dataset");
  std::string synth_out, datasets;
  std::optional<int> n_scenes, n_views, height, width;
  std::optional<std::uint64_t> synth_seed;
  synth_cmd->add_option("-c,--config", config_path, "Run config file (synth section)");
  synth_cmd->add_option("-o,--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--scenes", n_scenes, "Overrides synth.n_scenes");
  synth_cmd->add_option("--views", n_views, "Overrides synth.views_per_scene");
  synth_cmd->add_option("--height", height, "Overrides synth.height");
  synth_cmd->add_option("--width", width, "Overrides synth.width");
  synth_cmd->add_option("--seed", synth_seed, "Overrides synth.seed");
  synth_cmd->add_option("--datasets", datasets, "Comma-separated dataset ids assigned round-robin to scenes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  log::set_quiet(quiet);

  try {
    RunConfig cfg = config_or_default(config_path);
    if (!data_root.empty()) cfg.data.root = data_root;

    if (*prepare) {
      const auto index = load_run_dataset(cfg.data);
      write_pair_manifest(prep_out, prepare_pairs(index, cfg.train.prep, prep_count, prep_seed));
      log::info("wrote " + std::to_string(prep_count) + " recipes to " + prep_out);
    } else if (*train_cmd) {
      if (!objective.empty()) cfg.train.objective = objective_from_string(objective);
      if (!weights.empty()) cfg.train.weights = parse_weights(weights);
      if (epochs) cfg.train.epochs = *epochs;
      if (train_seed) cfg.train.seed = *train_seed;
      if (!out_dir.empty()) cfg.train.out_dir = out_dir;
      cfg.train.validate();
      const auto index = load_run_dataset(cfg.data);
      log::info("config hash " + cfg.hash());
      fs::path final_ckpt;
      if (!resume_from.empty()) {
        const TrainConfig* expected = config_path.empty() ? nullptr : &cfg.train;
        final_ckpt = resume(resume_from, index, extra_epochs.value_or(cfg.train.epochs),
                            out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir), expected);
      } else {
        final_ckpt = train(index, cfg.train);
      }
      std::cout << final_ckpt.string() << std::endl;
    } else if (*eval_cmd) {
      if (!labels.empty()) cfg.data.labels = labels;
      if (!protocol.empty()) cfg.eval.protocol = protocol;
      if (eval_seed) cfg.eval.split_seed = *eval_seed;
      if (alpha) cfg.eval.alpha = *alpha;
      if (!train_datasets.empty()) cfg.eval.train_datasets = split_list(train_datasets);
      if (!test_dataset.empty()) cfg.eval.test_dataset = test_dataset;
      if (!eval_out.empty()) cfg.eval.out_dir = eval_out;
      const auto result = run_evaluation(cfg, checkpoint);
      print_json(result.report_json.at("aggregate"));
    } else if (*bt_cmd) {
      std::map<std::string, PreferenceTable> tables;
      try {
        tables = read_comparisons_csv(comparisons);
      } catch (const FormatError& e) {
        throw ConfigError(e.what());
      }
      const auto scores = bt_scores(tables);
      if (bt_out.empty()) {
        print_json(scores);
      } else {
        write_text(bt_out, scores.dump(2) + "\n");
      }
    } else if (*inspect) {
      json info = json::object();
      if (!config_path.empty()) info["config"] = {{"resolved", cfg.to_json()}, {"hash", cfg.hash()}};
      if (!inspect_ckpt.empty()) {
        const auto data = read_checkpoint(inspect_ckpt);
        const auto backbone = data.meta.at("backbone").get<BackboneConfig>();
        info["checkpoint"] = {{"path", inspect_ckpt},
                              {"sha256", sha256_file(inspect_ckpt)},
                              {"step", data.meta.value("step", json())},
                              {"epoch", data.meta.value("epoch", json())},
                              {"backbone", data.meta.at("backbone")},
                              {"parameters", parameter_count(backbone)},
                              {"bounds", data.meta.value("bounds", json())},
                              {"log_sigma", data.meta.value("log_sigma", json())},
                              {"train", data.meta.value("train", json())}};
      }
      if (!cfg.data.root.empty()) {
        const auto index = load_run_dataset(cfg.data);
        json scenes = json::object();
        for (const auto& [scene, methods] : index.scenes) {
          for (const auto& [method, loc] : methods) {
            scenes[scene][method] = {{"views", loc.files.size()}, {"height", loc.height}, {"width", loc.width}};
          }
        }
        info["dataset"] = {{"root", index.root.string()},
                           {"scenes", scenes},
                           {"labels", index.labels.size()},
                           {"warnings", index.warnings}};
      }
      if (info.empty()) throw ConfigError("inspect needs --checkpoint, --data or --config");
      print_json(info);
    } else if (*synth_cmd) {
      SynthSpec spec = cfg.synth;
      if (n_scenes) spec.n_scenes = *n_scenes;
      if (n_views) spec.views_per_scene = *n_views;
      if (height) spec.height = *height;
      if (width) spec.width = *width;
      if (synth_seed) spec.seed = *synth_seed;
      if (!datasets.empty()) spec.dataset_ids = split_list(datasets);
      const auto labels_written = generate(spec, synth_out);
      log::info("wrote " + std::to_string(labels_written.jod.size()) + " labeled scenes to " + synth_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"scenequal"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace scenequal
