#include <doctest.h>

#include <fstream>

#include "../support.hpp"
#include "scenequal/checkpoint.hpp"
#include "scenequal/cli.hpp"
#include "scenequal/error.hpp"

using namespace scenequal;
using sqtest::TempDir;

TEST_CASE("run config round-trips and hashes stably") {
  RunConfig cfg;
  cfg.data.root = "/data";
  cfg.train.epochs = 3;
  cfg.eval.protocol = "cross_dataset";
  cfg.eval.test_dataset = "B";
  const auto j = cfg.to_json();
  const auto back = parse_run_config(j);
  CHECK(back.to_json() == j);
  CHECK(back.hash() == cfg.hash());
  RunConfig other = cfg;
  other.train.seed = 99;
  CHECK(other.hash() != cfg.hash());
}

TEST_CASE("unknown or misplaced config keys are rejected") {
  CHECK_THROWS_AS(parse_run_config({{"trian", nlohmann::json::object()}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"train", {{"epoch", 3}}}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"train", {{"backbone", nlohmann::json::object()}}}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config({{"backbone", {{"repr_dim", -1}}}}), ConfigError);
}

TEST_CASE("config file errors surface as ConfigError") {
  TempDir dir("cli");
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("exit codes") {
  TempDir dir("cli");
  CHECK(run_cli({"--help"}) == 0);
  CHECK(run_cli({"nonsense"}) == 2);
  CHECK(run_cli({"synth"}) == 2);
  std::ofstream(dir / "bad.csv") << "scene,a\n";
  CHECK(run_cli({"-q", "bt", "--comparisons", (dir / "bad.csv").string()}) == 2);
  CHECK(run_cli({"-q", "inspect", "--checkpoint", (dir / "nothing.bin").string()}) == 1);
}

TEST_CASE("synth, prepare and bt commands") {
  TempDir dir("cli");
  const auto data = (dir / "data").string();
  REQUIRE(run_cli({"-q", "synth", "-o", data, "--scenes", "2", "--views", "4", "--height", "32", "--width", "32"}) == 0);
  const auto index = load_dataset(data);
  CHECK(index.locator_count() == 8);

  const auto manifest = dir / "pairs.jsonl";
  REQUIRE(run_cli({"-q", "prepare", "--data", data, "-o", manifest.string(), "-n", "5", "-s", "3"}) == 0);
  const auto recipes = read_pair_manifest(manifest);
  CHECK(recipes.size() == 5);
  PrepConfig prep;
  CHECK(recipes == prepare_pairs(index, prep, 5, 3));

  std::ofstream(dir / "cmp.csv") << "scene,winner,loser,count\ns,a,b,3\ns,b,a,1\ns,b,c,2\ns,c,b,1\ns,c,a,1\ns,a,c,2\n";
  const auto scores = dir / "bt.json";
  REQUIRE(run_cli({"-q", "bt", "--comparisons", (dir / "cmp.csv").string(), "-o", scores.string()}) == 0);
  const auto j = nlohmann::json::parse(sqtest::read_bytes(scores));
  CHECK(j.contains("s"));
}

TEST_CASE("cross-dataset evaluation needs two datasets") {
  TempDir dir("cli");
  generate(sqtest::small_synth(2, 4, 32), dir / "data");
  const auto index = load_dataset(dir / "data");
  Trainer(index, sqtest::tiny_train_config(dir / "run")).save(dir / "ckpt");
  RunConfig cfg;
  cfg.data.root = dir / "data";
  cfg.eval.protocol = "cross_dataset";
  cfg.eval.test_dataset = "A";
  cfg.eval.out_dir = dir / "eval";
  CHECK_THROWS_AS(run_evaluation(cfg, index, dir / "ckpt"), ConfigError);

  cfg.eval.protocol = "half_split";
  const auto result = run_evaluation(cfg, index, dir / "ckpt");
  CHECK(std::filesystem::exists(dir / "eval" / "report.csv"));
  CHECK(std::filesystem::exists(dir / "eval" / "scatter.svg"));
  CHECK(result.report_json.contains("config_hash"));
  CHECK(result.report_json["checkpoint_sha256"] == sha256_file(dir / "ckpt"));
}
