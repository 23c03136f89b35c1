// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>
#include <string>

#include <torch/torch.h>

#include "backbone_count.hpp"
#include "metric_oracles.hpp"
#include "objective_oracles.hpp"
#include "stats.hpp"
#include "support.hpp"
#include "scenequal/backbone.hpp"
#include "scenequal/checkpoint.hpp"
#include "scenequal/cli.hpp"
#include "scenequal/log.hpp"

using namespace scenequal;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

// The toy set shared by the training criteria: 4 scenes x 4 pseudo-methods
// x 10 views at 128x128.
struct ToySet {
  sqtest::TempDir dir{"acceptance"};
  DatasetIndex index;
  ToySet() {
    generate(SynthSpec{}, dir / "toy");
    index = load_dataset(dir / "toy");
  }
};

ToySet& toy() {
  static ToySet t;
  return t;
}

TrainConfig toy_train_config(const fs::path& out, int steps, int batch = 4, double lr = 1e-3) {
  TrainConfig c;
  c.batch_size = batch;
  c.pairs_per_epoch = 8 * batch;
  c.epochs = steps / 8;
  c.learning_rate = lr;
  c.seed = 0;
  c.prep.clip_min = 4;
  c.prep.clip_max = 6;
  c.prep.crop_min = 32;
  c.prep.crop_max = 48;
  c.backbone.stage_channels = {8, 16, 32, 64};
  c.backbone.repr_dim = 64;
  c.backbone.transformer_layers = 2;
  c.backbone.attention_heads = 4;
  c.backbone.projector_hidden = 64;
  c.backbone.projector_out = 32;
  c.backbone.max_views = 16;
  c.out_dir = out;
  return c;
}

// Two vectors in the plane with the requested cosine.
std::pair<std::vector<double>, std::vector<double>> vectors_with_sim(double sim, double scale) {
  const double a = std::acos(std::clamp(sim, -1.0, 1.0));
  return {{scale, 0.0}, {std::cos(a), std::sin(a)}};
}

Outcome loss_fidelity() {
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), sig(0.05, 3.0), scale(0.1, 10.0);
  double worst_mbw = 0.0, worst_aqb = 0.0, worst_nll = 0.0;
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (int i = 0; i < 100; ++i) {
    const auto [u, v] = vectors_with_sim(unit(gen), scale(gen));
    const double target = unit(gen), sigma = sig(gen);
    const double sim = sqtest::oracle_cos(u, v);
    worst_mbw = std::max(worst_mbw, std::fabs(mbw_branch_loss(u, v, target) - sqtest::oracle_mbw_branch(sim, target)));
    const double aqb = aqb_branch_loss(u, v, target, std::log(sigma));
    worst_aqb = std::max(worst_aqb, std::fabs(aqb - sqtest::oracle_aqb_branch(sim, target, sigma)));
    worst_nll = std::max(worst_nll, std::fabs(aqb + half_log_2pi - sqtest::gaussian_nll(target, sim, sigma)));
  }
  const bool ok = worst_mbw <= 1e-12 && worst_aqb <= 1e-12 && worst_nll <= 1e-12;
  return {ok, "max |diff| mbw " + fmt(worst_mbw) + ", aqb " + fmt(worst_aqb) + ", gaussian nll " + fmt(worst_nll)};
}

Outcome aqb_stationarity() {
  bool ok = true;
  std::string detail;
  for (double e : {0.1, 0.5, 1.0}) {
    int used = 0;
    const auto sigma = sqtest::descend_sigma(e, 5000, 0.1, &used);
    double err = 0.0;
    for (double s : sigma) err = std::max(err, std::fabs(s - e));
    ok = ok && err < 1e-3 && used <= 5000;
    detail += "e=" + fmt(e) + ": |sigma-e| " + fmt(err, 2) + " after " + std::to_string(used) + " steps; ";
  }
  return {ok, detail};
}

Outcome gradient_checks() {
  std::mt19937_64 gen(303);
  std::uniform_real_distribution<double> ls(-1.0, 1.0);
  double worst = 0.0;
  int checked = 0;
  for (int i = 0; i < 10; ++i) {
    const auto batch = sqtest::random_batch(gen, 3, 8);
    const NoiseParams noise{{ls(gen), ls(gen), ls(gen)}};
    for (const auto& r : {sqtest::check_gradients(batch, noise, sqtest::mbw_objective, false),
                          sqtest::check_gradients(batch, noise, sqtest::aqb_objective, true)}) {
      worst = std::max(worst, r.max_rel_error);
      checked += r.checked;
    }
  }
  return {worst < 1e-4, "max relative error " + fmt(worst, 3) + " over " + std::to_string(checked) + " partials"};
}

Outcome pair_prep_invariants() {
  sqtest::TempDir dir("pairs");
  generate(sqtest::small_synth(3, 16, 48, 4), dir / "data");
  const auto index = load_dataset(dir / "data");
  PrepConfig prep;
  prep.clip_min = 4;
  prep.clip_max = 16;
  prep.crop_min = 24;
  prep.crop_max = 48;
  const auto recipes = prepare_pairs(index, prep, 1000, 404);
  SceneCache cache(index);
  std::vector<ContrastivePair> pairs;
  std::vector<double> rs;
  int bad = 0;
  for (const auto& recipe : recipes) {
    auto pair = realize_pair(cache, recipe);
    const int v = static_cast<int>(pair.s1.size());
    const bool same_scene = index.contains({recipe.scene_id, recipe.base_method_id}) &&
                            index.contains({recipe.scene_id, recipe.replacement_method_id});
    const bool same_shape = pair.s2.size() == pair.s1.size() && pair.s1.front().same_shape(pair.s2.front());
    const bool count_ok = static_cast<long>(recipe.replaced_indices.size()) == std::lround(recipe.r * v);
    const bool r_ok = recipe.r >= 0.0 && recipe.r < 0.5;
    bad += !(same_scene && same_shape && count_ok && r_ok);
    rs.push_back(recipe.r);
    pairs.push_back(std::move(pair));
  }
  const double d = sqtest::ks_uniform_statistic(rs, 0.0, 0.5);
  const double p = sqtest::ks_p_value(d, rs.size());

  write_pair_manifest(dir / "pairs.jsonl", recipes);
  const auto replay = read_pair_manifest(dir / "pairs.jsonl");
  int mismatched = replay.size() == recipes.size() ? 0 : 1;
  for (std::size_t i = 0; i < replay.size() && i < pairs.size(); ++i) {
    const auto again = realize_pair(index, replay[i]);
    mismatched += !(replay[i] == recipes[i] && again.s1 == pairs[i].s1 && again.s2 == pairs[i].s2);
  }
  return {bad == 0 && p > 0.01 && mismatched == 0,
          std::to_string(bad) + " invariant violations, KS D " + fmt(d) + " p " + fmt(p) + ", " +
              std::to_string(mismatched) + " replay mismatches"};
}

Outcome budget() {
  const auto n = pair_budget(10, 300, 5, 5, 20);
  return {n == 18000000ULL, "pair_budget(10, 300, 5, 5, 20) = " + std::to_string(n)};
}

Outcome metric_oracles() {
  std::mt19937_64 gen(606);
  std::uniform_int_distribution<int> len(2, 50), coarse(0, 6);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int n = len(gen);
    std::vector<double> x(n), y(n);
    // Every other instance draws from a small integer range to create ties.
    for (int k = 0; k < n; ++k) {
      x[k] = i % 2 ? coarse(gen) : nd(gen);
      y[k] = i % 2 ? coarse(gen) : nd(gen);
    }
    if (*std::max_element(x.begin(), x.end()) == *std::min_element(x.begin(), x.end())) x[0] += 1.0;
    if (*std::max_element(y.begin(), y.end()) == *std::min_element(y.begin(), y.end())) y[0] += 1.0;
    worst = std::max({worst, std::fabs(srcc(x, y) - sqtest::brute_spearman(x, y)),
                      std::fabs(plcc(x, y) - sqtest::brute_pearson(x, y)),
                      std::fabs(krcc(x, y) - sqtest::brute_kendall_b(x, y))});
  }
  const std::vector<double> a{1, 2, 3}, b{1, 3, 2};
  const double s = srcc(a, b), k = krcc(a, b);
  const bool worked = s == 0.5 && k == 1.0 / 3.0;
  return {worst <= 1e-9 && worked,
          "max |diff| " + fmt(worst, 3) + ", srcc " + fmt(s, 17) + ", krcc " + fmt(k, 17)};
}

Outcome backbone_sweep() {
  const BackboneConfig cfg;
  auto net = make_scene_net(cfg, 7);
  torch::NoGradGuard no_grad;
  torch::manual_seed(8);
  int bad = 0;
  std::int64_t dim = -1;
  for (int v : {1, 4, 8, 16, 32}) {
    for (auto [h, w] : {std::pair{96, 96}, std::pair{128, 160}, std::pair{256, 256}}) {
      const auto repr = net->represent(torch::rand({1, v, 3, h, w}));
      if (dim < 0) dim = repr.size(1);
      bad += !(repr.size(1) == dim && dim == cfg.repr_dim && torch::isfinite(repr).all().item<bool>());
    }
  }
  const auto count = parameter_count(cfg);
  const bool count_ok = count >= 3'500'000 && count <= 6'000'000 && count == sqtest::closed_form_params(cfg).total();
  return {bad == 0 && count_ok,
          std::to_string(15 - bad) + "/15 shapes finite with D=" + std::to_string(dim) + ", " +
              std::to_string(count) + " parameters"};
}

Outcome toy_end_to_end() {
  auto& t = toy();
  const auto cfg = toy_train_config(t.dir / "run8", 2000, 8, 3e-4);
  const auto ckpt = train(t.index, cfg);
  RunConfig run;
  run.train = cfg;
  run.data.root = t.dir / "toy";
  run.eval.out_dir = t.dir / "eval8";
  const auto result = run_evaluation(run, t.index, ckpt);
  const auto& r = result.report;
  // Other random halves, for context only.
  double across = 0.0;
  const FrozenModel model(ckpt);
  const auto reprs = extract_all(model, t.index, t.index.keys());
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto f = fit(reprs, t.index.labels, seed, 0.5);
    std::map<SceneKey, double> pred, lab;
    for (const auto& k : f.held_out) {
      pred[k] = f.model.predict(reprs.at(k));
      lab[k] = t.index.labels.at(k);
    }
    across += scene_wise_report(pred, lab).srcc.mean / 8.0;
  }
  return {r.srcc.mean >= 0.8, "2000 AQB steps; split seed 0 held-out SRCC mean " + fmt(r.srcc.mean) + " (std " +
                                  fmt(r.srcc.std) + ") over " + std::to_string(r.per_scene.size()) + " scenes, " +
                                  std::to_string(r.skipped.size()) + " skipped; mean over seeds 1-8 " +
                                  fmt(across)};
}

Outcome sigma_adaptation() {
  auto& t = toy();
  auto cfg = toy_train_config(t.dir / "run9", 1000);
  cfg.rep_target_noise = true;
  Trainer trainer(t.index, cfg);
  std::int64_t crossed = -1;
  StepReport last;
  for (int i = 0; i < 1000; ++i) {
    last = trainer.step();
    if (crossed < 0 && last.loss.sigmas[index_of(Branch::rep)] > last.loss.sigmas[index_of(Branch::iqa)]) {
      crossed = last.step;
    }
  }
  const double rep = last.loss.sigmas[index_of(Branch::rep)], iqa = last.loss.sigmas[index_of(Branch::iqa)];
  return {rep > iqa, "after 1000 steps sigma_rep " + fmt(rep) + ", sigma_iqa " + fmt(iqa) +
                         (crossed > 0 ? ", first exceeded at step " + std::to_string(crossed) : "")};
}

Outcome bradley_terry_recovery() {
  const std::vector<double> truth{0.35, 0.25, 0.18, 0.13, 0.09};
  std::mt19937_64 gen(1010);
  PreferenceTable table;
  table.items = {"a", "b", "c", "d", "e"};
  table.wins.assign(5, std::vector<double>(5, 0.0));
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) {
      std::bernoulli_distribution i_wins(truth[i] / (truth[i] + truth[j]));
      for (int c = 0; c < 200; ++c) (i_wins(gen) ? table.wins[i][j] : table.wins[j][i]) += 1.0;
    }
  }
  const auto fit = bradley_terry(table);
  bool monotone = true;
  for (std::size_t k = 1; k < fit.log_likelihood.size(); ++k) {
    monotone = monotone && fit.log_likelihood[k] >= fit.log_likelihood[k - 1] - 1e-12;
  }
  std::vector<int> order(5);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return fit.strengths[x] > fit.strengths[y]; });
  const bool ranking = order == std::vector<int>{0, 1, 2, 3, 4};

  PreferenceTable two;
  two.items = {"x", "y"};
  two.wins = {{0.0, 3.0}, {1.0, 0.0}};
  const auto pair = bradley_terry(two);
  const bool exact = pair.strengths[0] == 0.75 && pair.strengths[1] == 0.25;
  return {fit.converged && monotone && ranking && exact,
          std::string(fit.converged ? "converged" : "not converged") + " in " + std::to_string(fit.iterations) +
              " iterations, log-likelihood " + (monotone ? "monotone" : "not monotone") + ", ranking " +
              (ranking ? "recovered" : "wrong") + ", 3:1 -> (" + fmt(pair.strengths[0], 17) + ", " +
              fmt(pair.strengths[1], 17) + ")"};
}

int svg_positive_count(const fs::path& svg) {
  const auto text = sqtest::read_bytes(svg);
  std::smatch m;
  if (!std::regex_search(text, m, std::regex(R"((\d+)/(\d+) scenes with positive slope)"))) return -1;
  return std::stoi(m[1]);
}

Outcome protocol_plumbing() {
  sqtest::TempDir dir("protocols");
  auto spec = sqtest::small_synth(6, 6, 48, 11);
  spec.dataset_ids = {"A", "B", "C"};
  generate(spec, dir / "data");
  const auto index = load_dataset(dir / "data");
  auto train_cfg = sqtest::tiny_train_config(dir / "run");
  train_cfg.epochs = 3;
  const auto ckpt = train(index, train_cfg);

  std::string detail;
  bool ok = true;
  auto check = [&](const std::string& protocol) {
    RunConfig cfg;
    cfg.data.root = dir / "data";
    cfg.eval.protocol = protocol;
    cfg.eval.split_seed = 5;
    cfg.eval.test_dataset = "C";
    cfg.eval.out_dir = dir / (protocol + "_1");
    const auto first = run_evaluation(cfg, index, ckpt);
    cfg.eval.out_dir = dir / (protocol + "_2");
    const auto second = run_evaluation(cfg, index, ckpt);

    const auto& fitted = first.fit.model.fitted_on;
    bool disjoint = true;
    for (const auto& k : first.fit.held_out) {
      disjoint = disjoint && std::find(fitted.begin(), fitted.end(), k) == fitted.end();
    }
    if (protocol == "cross_dataset") {
      for (const auto& k : first.fit.held_out) disjoint = disjoint && index.datasets.at(k) == "C";
      for (const auto& k : fitted) disjoint = disjoint && index.datasets.at(k) != "C";
    }
    auto strip = [](nlohmann::json j) {
      j.erase("config_hash");
      return j;
    };
    const bool reproducible = first.predictions == second.predictions &&
                              strip(first.report_json) == strip(second.report_json) &&
                              sqtest::read_bytes(dir / (protocol + "_1") / "scatter.svg") ==
                                  sqtest::read_bytes(dir / (protocol + "_2") / "scatter.svg");
    int srcc_positive = 0;
    for (const auto& [scene, m] : first.report.per_scene) srcc_positive += m.srcc > 0.0;
    const int plotted = svg_positive_count(dir / (protocol + "_1") / "scatter.svg");
    const bool counts = plotted == srcc_positive && first.scatter.positive == srcc_positive &&
                        first.scatter.total == static_cast<int>(first.report.per_scene.size());
    ok = ok && disjoint && reproducible && counts;
    detail += protocol + ": " + (disjoint ? "disjoint" : "OVERLAP") + ", " +
              (reproducible ? "reproducible" : "NOT reproducible") + ", positive slopes " + std::to_string(plotted) +
              "/" + std::to_string(first.scatter.total) + " vs SRCC>0 " + std::to_string(srcc_positive) + "; ";
  };
  check("half_split");
  check("cross_dataset");
  return {ok, detail};
}

Outcome checkpoint_round_trip() {
  auto& t = toy();
  const auto cfg = toy_train_config(t.dir / "run12", 20);
  Trainer uninterrupted(t.index, cfg);
  uninterrupted.run_steps(5);
  uninterrupted.save(t.dir / "ckpt12");
  const auto expected = uninterrupted.step();

  Trainer restored(t.index, t.dir / "ckpt12");
  const auto got = restored.step();
  double loss_diff = std::fabs(got.loss.total - expected.loss.total);
  for (std::size_t b = 0; b < kBranchCount; ++b) {
    loss_diff = std::max(loss_diff, std::fabs(got.loss.sigmas[b] - expected.loss.sigmas[b]));
  }
  const auto wa = uninterrupted.flat_weights(), wb = restored.flat_weights();
  double weight_diff = wa.size() == wb.size() ? 0.0 : 1.0;
  for (std::size_t i = 0; i < std::min(wa.size(), wb.size()); ++i) {
    weight_diff = std::max(weight_diff, static_cast<double>(std::fabs(wa[i] - wb[i])));
  }
  return {got.step == expected.step && loss_diff <= 1e-10 && weight_diff <= 1e-10,
          "step " + std::to_string(got.step) + ": loss/sigma diff " + fmt(loss_diff, 3) + ", weight diff " +
              fmt(weight_diff, 3)};
}

}  // namespace

int main() {
  log::set_quiet(true);
  torch::set_num_threads(1);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"loss-formula fidelity", loss_fidelity},
      {"AQB stationarity", aqb_stationarity},
      {"gradient checks", gradient_checks},
      {"pair-prep invariants", pair_prep_invariants},
      {"pair budget", budget},
      {"metric oracles", metric_oracles},
      {"backbone shape/finiteness sweep", backbone_sweep},
      {"toy end-to-end", toy_end_to_end},
      {"sigma adaptation", sigma_adaptation},
      {"Bradley-Terry recovery", bradley_terry_recovery},
      {"protocol plumbing", protocol_plumbing},
      {"checkpoint round-trip", checkpoint_round_trip},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !out.pass;
    std::printf("%s %2zu %s: %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
