#include "scenequal/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "scenequal/error.hpp"

namespace scenequal {
namespace {

void check_target(double target) {
  if (!(target >= -1.0 && target <= 1.0)) {
    throw Error("guidance target " + std::to_string(target) + " outside [-1, 1]");
  }
}

double sign(double x) { return (x > 0.0) - (x < 0.0); }

void check_pair(const PairProjections& p) {
  for (Branch b : kBranches) {
    const auto i = index_of(b);
    if (p.first[i].size() != p.second[i].size() || p.first[i].empty()) {
      throw Error("projection dimension mismatch on branch " + std::string(to_string(b)));
    }
  }
}

void prepare_gradient(std::span<const PairProjections> batch, ObjectiveGradient* g) {
  if (!g) return;
  g->first.assign(batch.size(), {});
  g->second.assign(batch.size(), {});
  for (std::size_t n = 0; n < batch.size(); ++n) {
    for (Branch b : kBranches) {
      const auto i = index_of(b);
      g->first[n][i].assign(batch[n].first[i].size(), 0.0);
      g->second[n][i].assign(batch[n].second[i].size(), 0.0);
    }
  }
  g->log_sigma = {0.0, 0.0, 0.0};
}

// Adds scale * d sim / d(p1, p2) for one branch of one pair into the gradient.
void accumulate_sim_grad(const PairProjections& p, std::size_t n, Branch b, double scale,
                         ObjectiveGradient& g) {
  const auto i = index_of(b);
  std::vector<double> du(p.first[i].size()), dv(p.second[i].size());
  cosine_sim_grad(p.first[i], p.second[i], du, dv);
  for (std::size_t k = 0; k < du.size(); ++k) {
    g.first[n][i][k] += scale * du[k];
    g.second[n][i][k] += scale * dv[k];
  }
}

}  // namespace

double BranchWeights::operator[](Branch b) const {
  switch (b) {
    case Branch::iqa: return iqa;
    case Branch::vqa: return vqa;
    case Branch::rep: return rep;
  }
  return iqa;
}

void BranchWeights::validate() const {
  if (iqa < 0 || vqa < 0 || rep < 0) throw ConfigError("branch weights must be nonnegative");
  if (iqa == 0 && vqa == 0 && rep == 0) throw ConfigError("at least one branch weight must be > 0");
}

double NoiseParams::sigma(Branch b) const { return std::exp(log_sigma[index_of(b)]); }

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error("cosine_sim: dimension mismatch");
  const double dot = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
  const double nu = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
  const double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  return dot / (std::max(nu, kNormEpsilon) * std::max(nv, kNormEpsilon));
}

double cosine_sim_grad(std::span<const double> u, std::span<const double> v, std::span<double> du,
                       std::span<double> dv) {
  if (u.size() != v.size() || du.size() != u.size() || dv.size() != v.size()) {
    throw Error("cosine_sim_grad: dimension mismatch");
  }
  const double dot = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
  const double nu = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
  const double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  const double du_n = std::max(nu, kNormEpsilon);
  const double dv_n = std::max(nv, kNormEpsilon);
  const double sim = dot / (du_n * dv_n);
  // Below the floor the norm is a constant and only the dot term remains.
  const double ru = nu > kNormEpsilon ? sim / (nu * nu) : 0.0;
  const double rv = nv > kNormEpsilon ? sim / (nv * nv) : 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    du[k] = v[k] / (du_n * dv_n) - ru * u[k];
    dv[k] = u[k] / (du_n * dv_n) - rv * v[k];
  }
  return sim;
}

double mbw_branch_loss(std::span<const double> p1, std::span<const double> p2, double target) {
  check_target(target);
  return std::abs(cosine_sim(p1, p2) - target);
}

double mbw_total(const PerBranch<double>& losses, const BranchWeights& weights) {
  double total = 0.0;
  for (Branch b : kBranches) total += weights[b] * losses[index_of(b)];
  return total;
}

double aqb_residual_loss(double residual, double log_sigma) {
  return residual * residual * std::exp(-2.0 * log_sigma) / 2.0 + log_sigma;
}

double aqb_branch_loss(std::span<const double> p1, std::span<const double> p2, double target,
                       double log_sigma) {
  check_target(target);
  return aqb_residual_loss(cosine_sim(p1, p2) - target, log_sigma);
}

LossBreakdown mbw_batch(std::span<const PairProjections> batch, const BranchWeights& weights,
                        ObjectiveGradient* gradient) {
  if (batch.empty()) throw Error("empty batch");
  prepare_gradient(batch, gradient);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  LossBreakdown out;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& p = batch[n];
    check_pair(p);
    for (Branch b : kBranches) {
      const auto i = index_of(b);
      const double target = p.targets[b];
      check_target(target);
      const double e = cosine_sim(p.first[i], p.second[i]) - target;
      out.per_branch[i] += std::abs(e) * inv_n;
      if (gradient && weights[b] != 0.0) {
        accumulate_sim_grad(p, n, b, weights[b] * sign(e) * inv_n, *gradient);
      }
    }
  }
  out.total = mbw_total(out.per_branch, weights);
  return out;
}

LossBreakdown aqb_total(std::span<const PairProjections> batch, const NoiseParams& noise,
                        ObjectiveGradient* gradient) {
  if (batch.empty()) throw Error("empty batch");
  prepare_gradient(batch, gradient);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  LossBreakdown out;
  for (Branch b : kBranches) out.sigmas[index_of(b)] = noise.sigma(b);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& p = batch[n];
    check_pair(p);
    for (Branch b : kBranches) {
      const auto i = index_of(b);
      const double target = p.targets[b];
      check_target(target);
      const double log_sigma = noise.log_sigma[i];
      const double inv_var = std::exp(-2.0 * log_sigma);
      const double e = cosine_sim(p.first[i], p.second[i]) - target;
      out.per_branch[i] += aqb_residual_loss(e, log_sigma) * inv_n;
      if (gradient) {
        accumulate_sim_grad(p, n, b, e * inv_var * inv_n, *gradient);
        gradient->log_sigma[i] += (1.0 - e * e * inv_var) * inv_n;
      }
    }
  }
  out.total = out.per_branch[0] + out.per_branch[1] + out.per_branch[2];
  return out;
}

}  // namespace scenequal
