#pragma once

#include <span>
#include <vector>

#include "scenequal/branch.hpp"
#include "scenequal/guidance.hpp"

namespace scenequal {

struct BranchWeights {
  double iqa = 1.5;
  double vqa = 1.0;
  double rep = 0.2;

  double operator[](Branch b) const;
  void validate() const;
  bool operator==(const BranchWeights&) const = default;
};

// Trainable log-standard-deviations; sigma = exp(log_sigma) > 0.
struct NoiseParams {
  PerBranch<double> log_sigma{0.0, 0.0, 0.0};

  double sigma(Branch b) const;
};

struct LossBreakdown {
  double total = 0.0;
  // Batch mean of each branch's loss term.
  PerBranch<double> per_branch{};
  // Sigma per branch (1.0 under MBW, where no noise parameters are used).
  PerBranch<double> sigmas{1.0, 1.0, 1.0};
};

// Projections of both clips of one pair, per branch, plus the pair's targets.
struct PairProjections {
  PerBranch<std::vector<double>> first;
  PerBranch<std::vector<double>> second;
  GuidanceVector targets;
};

// d(total)/d(projection) for every pair and d(total)/d(log_sigma).
struct ObjectiveGradient {
  std::vector<PerBranch<std::vector<double>>> first;
  std::vector<PerBranch<std::vector<double>>> second;
  PerBranch<double> log_sigma{0.0, 0.0, 0.0};
};

inline constexpr double kNormEpsilon = 1e-12;

// u.v / (max(|u|, eps) max(|v|, eps)).
double cosine_sim(std::span<const double> u, std::span<const double> v);

// Returns the similarity and writes d sim / du and d sim / dv.
double cosine_sim_grad(std::span<const double> u, std::span<const double> v,
                       std::span<double> du, std::span<double> dv);

// |sim(p1, p2) - target|, in [0, 2].
double mbw_branch_loss(std::span<const double> p1, std::span<const double> p2, double target);

// sum_b lambda_b * loss_b.
double mbw_total(const PerBranch<double>& losses, const BranchWeights& weights);

// (sim - target)^2 / (2 sigma^2) + log sigma, sigma = exp(log_sigma).
double aqb_branch_loss(std::span<const double> p1, std::span<const double> p2, double target,
                       double log_sigma);

// Same term evaluated from the residual e = sim - target directly.
double aqb_residual_loss(double residual, double log_sigma);

// Batch mean of the per-pair MBW sums. Gradient is filled when non-null.
LossBreakdown mbw_batch(std::span<const PairProjections> batch, const BranchWeights& weights,
                        ObjectiveGradient* gradient = nullptr);

// Batch mean of per-pair sums of AQB branch terms.
LossBreakdown aqb_total(std::span<const PairProjections> batch, const NoiseParams& noise,
                        ObjectiveGradient* gradient = nullptr);

}  // namespace scenequal
