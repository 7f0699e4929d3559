#ifndef FIRM_METRICS_HPP_
#define FIRM_METRICS_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "firm/actor.hpp"
#include "firm/critic.hpp"
#include "firm/env.hpp"
#include "firm/mgda.hpp"
#include "firm/oracle.hpp"
#include "firm/policy.hpp"
#include "firm/rng.hpp"

namespace firm {

/// min over the simplex of ||grad_J lambda||^2 for a d x M exact gradient
/// matrix. Solved without regularization or normalization.
inline double pareto_stationarity(const MatrixXd& grad_j) {
  GramMatrix g{MatrixXd(grad_j.transpose() * grad_j), false};
  MgdaConfig config;
  config.beta = 0.0;
  config.normalize_gram = false;
  config.tol = 1e-10;
  config.max_iters = 100'000;
  return std::max(0.0, solve_simplex_qp(g, config).objective);
}

/// ||grad_J lambda||^2 at a fixed weighting.
inline double weighted_stationarity(const MatrixXd& grad_j, const VectorXd& lambda) {
  return (grad_j * lambda).squaredNorm();
}

inline VectorXd mean_lambda(std::span<const SimplexWeights> lambdas) {
  VectorXd mean = VectorXd::Zero(lambdas.front().size());
  for (const auto& l : lambdas) mean += l.lambda;
  return mean / static_cast<double>(lambdas.size());
}

/// (1/C) sum_c ||lambda^c - mean lambda||_1.
namespace detail {

// Mean written as x_0 + avg(x_c - x_0): identical inputs give exactly x_0,
// so the deviation metrics below are exactly zero when nothing disagrees.
inline VectorXd anchored_mean(std::span<const SimplexWeights> lambdas) {
  const VectorXd& anchor = lambdas.front().lambda;
  VectorXd offset = VectorXd::Zero(anchor.size());
  for (const auto& l : lambdas) offset += l.lambda - anchor;
  return anchor + offset / static_cast<double>(lambdas.size());
}

}  // namespace detail

inline double lambda_disagreement(std::span<const SimplexWeights> lambdas) {
  if (lambdas.empty()) return 0.0;
  const VectorXd mean = detail::anchored_mean(lambdas);
  double total = 0.0;
  for (const auto& l : lambdas) total += (l.lambda - mean).lpNorm<1>();
  return total / static_cast<double>(lambdas.size());
}

/// Same as lambda_disagreement with the Euclidean norm.
inline double lambda_disagreement_l2(std::span<const SimplexWeights> lambdas) {
  if (lambdas.empty()) return 0.0;
  const VectorXd mean = detail::anchored_mean(lambdas);
  double total = 0.0;
  for (const auto& l : lambdas) total += (l.lambda - mean).norm();
  return total / static_cast<double>(lambdas.size());
}

inline PolicyParams mean_policy(std::span<const PolicyParams> policies) {
  MatrixXd sum = MatrixXd::Zero(policies.front().theta.rows(), policies.front().theta.cols());
  for (const auto& p : policies) sum += p.theta;
  return PolicyParams(sum / static_cast<double>(policies.size()));
}

/// (1/C) sum_c ||theta^c - mean theta||_2.
inline double param_drift(std::span<const PolicyParams> policies) {
  if (policies.empty()) return 0.0;
  const MatrixXd& anchor = policies.front().theta;
  MatrixXd offset = MatrixXd::Zero(anchor.rows(), anchor.cols());
  for (const auto& p : policies) offset += p.theta - anchor;
  const MatrixXd mean = anchor + offset / static_cast<double>(policies.size());
  double total = 0.0;
  for (const auto& p : policies) total += (p.theta - mean).norm();
  return total / static_cast<double>(policies.size());
}

// ---------------------------------------------------------------------------
// Randomized check of the lambda-stability bound
//   ||lambda*_c - lambda*_c'||_2 <= (4 R M / beta) max_j ||g^{j,c} - g^{j,c'}||_2
// for the raw (un-normalized) beta-regularized QP.

struct LemmaCheckReport {
  int trials = 0;
  double max_ratio = 0.0;
  double R_used = 0.0;
  bool pass = false;
};

struct LemmaTrial {
  double lhs = 0.0;
  double rhs = 0.0;
  double radius = 0.0;
  double ratio() const { return lhs == 0.0 ? 0.0 : lhs / rhs; }
};

inline LemmaTrial lemma_trial(const GradientSet& a, const GradientSet& b, double beta) {
  MgdaConfig config;
  config.beta = beta;
  config.normalize_gram = false;
  config.tol = 1e-13;
  config.max_iters = 200'000;
  const int m = a.n_objectives();
  LemmaTrial t;
  t.radius = std::max(a.max_norm(), b.max_norm());
  t.lhs = (solve_mgda(a, config).weights.lambda - solve_mgda(b, config).weights.lambda).norm();
  t.rhs = 4.0 * t.radius * m / beta * (a.grads - b.grads).rowwise().norm().maxCoeff();
  return t;
}

inline LemmaCheckReport lemma_stability_check(int n_trials, int n_objectives, int dim, double beta,
                                              std::uint64_t seed) {
  if (!(beta > 0.0)) throw ConfigError("lemma check requires beta > 0");
  Rng rng = Rng::stream(seed, 0x6c656d6d61);
  LemmaCheckReport report;
  report.trials = n_trials;
  auto gaussian = [&](int rows, int cols) {
    MatrixXd x(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int k = 0; k < cols; ++k) x(i, k) = rng.normal();
    }
    return x;
  };
  for (int trial = 0; trial < n_trials; ++trial) {
    GradientSet a{gaussian(n_objectives, dim), 1};
    // Alternate between independent objectives and nearly collinear ones,
    // where the unregularized solution is most sensitive.
    if (trial % 2 == 1) {
      for (int j = 1; j < n_objectives; ++j) a.grads.row(j) = a.grads.row(0) + 0.05 * gaussian(1, dim);
    }
    for (int j = 0; j < n_objectives; ++j) a.grads.row(j) *= std::pow(10.0, rng.uniform(-2.0, 0.5));
    const double perturbation = std::pow(10.0, rng.uniform(-3.0, 0.0));
    GradientSet b{a.grads + perturbation * a.grads.rowwise().norm().maxCoeff() / std::sqrt(dim) *
                                gaussian(n_objectives, dim),
                  1};
    const LemmaTrial t = lemma_trial(a, b, beta);
    report.R_used = std::max(report.R_used, t.radius);
    report.max_ratio = std::max(report.max_ratio, t.ratio());
  }
  report.pass = report.max_ratio <= 1.0 + 1e-6;
  return report;
}

// ---------------------------------------------------------------------------
// Variance of the client-averaged combined gradient at a frozen policy.

struct VarianceRow {
  int n_clients = 1;
  int batch_size = 1;
  double variance = 0.0;
};

/// For each (C, B) estimates E||gbar - E gbar||^2 over `n_reps` independent
/// draws, where gbar averages C clients' uniformly weighted combined
/// gradients. Critics are pinned to the exact TD fixed points and each chain
/// starts from the stationary distribution, so every client batch is an
/// unbiased draw and only sampling noise remains.
inline std::vector<VarianceRow> variance_speedup_check(const MomdpSpec& m, const PolicyParams& policy,
                                                       std::span<const std::pair<int, int>> grid, int n_reps,
                                                       std::uint64_t seed) {
  if (n_reps < 2) throw ConfigError("variance check needs at least 2 repetitions");
  const FeatureMap features = one_hot_features(m);
  const MatrixXd table = policy.table();
  CriticWeights critic = CriticWeights::zeros(m.n_objectives, features.dim, default_critic_radius(m));
  for (int j = 0; j < m.n_objectives; ++j) {
    critic.weights.row(j) = oracle::exact_td_fixpoint(m, table, features, j).transpose();
  }
  const VectorXd stationary = oracle::stationary_distribution(m, table);
  const SimplexWeights uniform = SimplexWeights::uniform(m.n_objectives);

  std::vector<VarianceRow> rows;
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    const auto [n_clients, batch] = grid[cell];
    std::vector<VectorXd> draws;
    draws.reserve(static_cast<std::size_t>(n_reps));
    for (int rep = 0; rep < n_reps; ++rep) {
      VectorXd mean = VectorXd::Zero(policy.dim());
      for (int c = 0; c < n_clients; ++c) {
        const std::uint64_t id = (static_cast<std::uint64_t>(cell) << 40) ^ (static_cast<std::uint64_t>(rep) << 16) ^
                                 static_cast<std::uint64_t>(c);
        Rng rng = Rng::stream(seed, id);
        const int start = static_cast<int>(rng.categorical({stationary.data(), static_cast<std::size_t>(stationary.size())}));
        const ActorBatch batch_out = objective_gradients(policy, critic, m, features, start, batch, rng);
        mean += combine(batch_out.gradients, uniform);
      }
      draws.push_back(mean / static_cast<double>(n_clients));
    }
    VectorXd center = VectorXd::Zero(policy.dim());
    for (const auto& d : draws) center += d;
    center /= static_cast<double>(n_reps);
    double variance = 0.0;
    for (const auto& d : draws) variance += (d - center).squaredNorm();
    rows.push_back(VarianceRow{n_clients, batch, variance / static_cast<double>(n_reps - 1)});
  }
  return rows;
}

}  // namespace firm

#endif  // FIRM_METRICS_HPP_
