#include <doctest.h>

#include <cmath>

#include "../objective_oracles.hpp"
#include "scenequal/error.hpp"
#include "scenequal/objective.hpp"

using namespace scenequal;

namespace {

std::vector<double> v2(double a, double b) { return {a, b}; }

// Projections whose cosine similarity is exactly `sim` (2-D unit vectors).
PairProjections pair_with_sim(double sim, GuidanceVector targets) {
  PairProjections p;
  const double angle = std::acos(sim);
  for (std::size_t b = 0; b < kBranchCount; ++b) {
    p.first[b] = v2(1.0, 0.0);
    p.second[b] = v2(std::cos(angle), std::sin(angle));
  }
  p.targets = targets;
  return p;
}

}  // namespace

TEST_CASE("cosine similarity examples") {
  CHECK(cosine_sim(v2(1, 0), v2(0, 1)) == 0.0);
  CHECK(cosine_sim(v2(1, 1), v2(2, 2)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_sim(v2(1, 0), v2(-1, 0)) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(cosine_sim(v2(0, 0), v2(1, 0)) == 0.0);
  const std::vector<double> three{1, 2, 3};
  CHECK_THROWS(cosine_sim(v2(1, 0), three));
}

TEST_CASE("mbw branch loss") {
  const auto p = pair_with_sim(0.8, {});
  CHECK(mbw_branch_loss(p.first[0], p.second[0], 0.5) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(mbw_branch_loss(v2(1, 2), v2(1, 2), 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(mbw_branch_loss(v2(1, 0), v2(-1, 0), 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS(mbw_branch_loss(v2(1, 0), v2(1, 0), 1.5));
}

TEST_CASE("mbw total") {
  CHECK(mbw_total({0.2, 0.4, 1.0}, BranchWeights{1.5, 1.0, 0.2}) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(mbw_total({0.7, 0.4, 1.0}, BranchWeights{1.0, 0.0, 0.0}) == 0.7);
  CHECK(mbw_total({0.0, 0.0, 0.0}, BranchWeights{}) == 0.0);
  CHECK_THROWS_AS(BranchWeights({0, 0, 0}).validate(), ConfigError);
  CHECK_THROWS_AS(BranchWeights({-1, 1, 1}).validate(), ConfigError);
}

TEST_CASE("aqb branch loss") {
  CHECK(aqb_residual_loss(0.0, 0.0) == 0.0);
  CHECK(aqb_residual_loss(0.5, std::log(0.5)) == doctest::Approx(0.5 - std::log(2.0)).epsilon(1e-12));
  CHECK(aqb_residual_loss(0.5, std::log(0.5)) == doctest::Approx(-0.193147).epsilon(1e-6));
  const auto p = pair_with_sim(0.3, {});
  CHECK(aqb_branch_loss(p.first[0], p.second[0], -0.2, std::log(0.5)) ==
        doctest::Approx(sqtest::oracle_aqb_branch(sqtest::oracle_cos(p.first[0], p.second[0]), -0.2, 0.5))
            .epsilon(1e-12));
}

TEST_CASE("aqb loss is the Gaussian negative log density up to a constant") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1, 1), ls(-2, 1);
  for (int i = 0; i < 100; ++i) {
    const double sim = u(gen), target = u(gen), log_sigma = ls(gen);
    const double lhs = aqb_residual_loss(sim - target, log_sigma) + 0.5 * std::log(2 * std::numbers::pi);
    CHECK(std::fabs(lhs - sqtest::gaussian_nll(target, sim, std::exp(log_sigma))) < 1e-12);
  }
}

TEST_CASE("aqb bounded below by 1/2 + log|e|") {
  for (double e : {0.05, 0.3, 1.2}) {
    for (double ls = -4; ls <= 2; ls += 0.25) CHECK(aqb_residual_loss(e, ls) >= 0.5 + std::log(e) - 1e-12);
  }
}

TEST_CASE("aqb total examples") {
  const auto exact = pair_with_sim(1.0, {1.0, 1.0, 1.0});
  CHECK(std::fabs(aqb_total(std::vector{exact}, NoiseParams{}).total) < 1e-12);

  std::mt19937_64 gen(9);
  auto batch = sqtest::random_batch(gen, 4, 5);
  NoiseParams noise{{0.1, -0.3, 0.4}};
  const double once = aqb_total(batch, noise).total;
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  CHECK(aqb_total(doubled, noise).total == doctest::Approx(once).epsilon(1e-12));

  // Single branch contributes 0.5^2/(2*0.25) + log 0.5; the others are zero residual, sigma 1.
  auto single = pair_with_sim(0.8, {0.3, 0.8, 0.8});
  NoiseParams half{{std::log(0.5), 0.0, 0.0}};
  CHECK(aqb_total(std::vector{single}, half).total == doctest::Approx(-0.193147).epsilon(1e-5));

  CHECK_THROWS(aqb_total(std::vector<PairProjections>{}, NoiseParams{}));
  CHECK_THROWS(mbw_batch(std::vector<PairProjections>{}, BranchWeights{}));
}

TEST_CASE("breakdown totals match their parts") {
  std::mt19937_64 gen(5);
  const auto batch = sqtest::random_batch(gen, 6, 4);
  const NoiseParams noise{{0.2, 0.0, -0.5}};
  const auto aqb = aqb_total(batch, noise);
  CHECK(aqb.total == doctest::Approx(aqb.per_branch[0] + aqb.per_branch[1] + aqb.per_branch[2]).epsilon(1e-10));
  CHECK(aqb.sigmas[2] == doctest::Approx(std::exp(-0.5)));
  const BranchWeights w{1.5, 1.0, 0.2};
  const auto mbw = mbw_batch(batch, w);
  CHECK(mbw.total == doctest::Approx(mbw_total(mbw.per_branch, w)).epsilon(1e-10));
}

TEST_CASE("losses are invariant to positive projection scaling") {
  std::mt19937_64 gen(6);
  auto batch = sqtest::random_batch(gen, 3, 6);
  const NoiseParams noise{{0.3, 0.1, -0.2}};
  const double a = aqb_total(batch, noise).total, m = mbw_batch(batch, BranchWeights{}).total;
  for (auto& p : batch) {
    for (auto& v : p.first[1]) v *= 7.5;
    for (auto& v : p.second[0]) v *= 0.01;
  }
  CHECK(aqb_total(batch, noise).total == doctest::Approx(a).epsilon(1e-12));
  CHECK(mbw_batch(batch, BranchWeights{}).total == doctest::Approx(m).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> ls(-0.5, 0.5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto batch = sqtest::random_batch(gen, 3, 4);
    const NoiseParams noise{{ls(gen), ls(gen), ls(gen)}};
    CHECK(sqtest::check_gradients(batch, noise, sqtest::mbw_objective, false).max_rel_error < 1e-4);
    CHECK(sqtest::check_gradients(batch, noise, sqtest::aqb_objective, true).max_rel_error < 1e-4);
  }
}

TEST_CASE("sigma descends to the frozen residual") {
  for (double e : {0.1, 0.5, 1.0}) {
    int used = 0;
    const auto sigma = sqtest::descend_sigma(e, 5000, 0.1, &used);
    for (double s : sigma) CHECK(std::fabs(s - e) < 1e-3);
    CHECK(used <= 5000);
  }
}
