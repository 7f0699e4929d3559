#include <gtest/gtest.h>

#include <cmath>

#include "firm/actor.hpp"
#include "firm/oracle.hpp"
#include "test_util.hpp"

namespace firm {
namespace {

int draw_stationary(const VectorXd& d, Rng& rng) {
  return rng.categorical(std::span<const double>(d.data(), static_cast<std::size_t>(d.size())));
}

TEST(SampleAction, SaturatedSoftmax) {
  PolicyParams p = PolicyParams::zeros(1, 2);
  p.theta << 50.0, -50.0;
  Rng rng(1);
  int zeros = 0;
  for (int i = 0; i < 10'000; ++i) zeros += sample_action(p, 0, rng) == 0;
  EXPECT_GE(zeros, 9990);
}

TEST(SampleAction, UniformChiSquared) {
  const PolicyParams p = PolicyParams::zeros(2, 4);
  Rng rng(2);
  std::vector<int> counts(4, 0);
  constexpr int kDraws = 100'000;
  for (int i = 0; i < kDraws; ++i) ++counts[static_cast<std::size_t>(sample_action(p, 1, rng))];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - kDraws / 4.0) * (c - kDraws / 4.0) / (kDraws / 4.0);
  EXPECT_LT(chi2, 16.27);
}

TEST(SampleAction, ShiftInvariant) {
  Rng init(3);
  const PolicyParams p = testing::random_policy(3, 3, init);
  PolicyParams shifted = p;
  shifted.theta.row(1).array() += 123.0;
  Rng a(4);
  Rng b(4);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(sample_action(p, 1, a), sample_action(shifted, 1, b));
}

TEST(Score, UniformTwoActions) {
  const PolicyParams p = PolicyParams::zeros(3, 2);
  const VectorXd psi = score(p, 1, 0);
  const VectorXd expected = (VectorXd(6) << 0, 0, 0.5, -0.5, 0, 0).finished();
  EXPECT_LE((psi - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Score, ZeroMeanAndBounded) {
  Rng rng(5);
  for (int trial = 0; trial < 10'000; ++trial) {
    const PolicyParams p = testing::random_policy(3, 4, rng, 5.0);
    const int s = trial % 3;
    const int a = trial % 4;
    EXPECT_LE(score(p, s, a).norm(), kScoreBound);
    if (trial % 100 == 0) {
      VectorXd mean = VectorXd::Zero(p.dim());
      const VectorXd pi = p.probabilities(s);
      for (int b = 0; b < 4; ++b) mean += pi(b) * score(p, s, b);
      EXPECT_LE(mean.cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(ObjectiveGradients, ZeroRewardsZeroCritic) {
  MomdpSpec m = build_random_momdp(3, 2, 2, 0.9, 1.0, 1);
  for (auto& r : m.rewards) r.setZero();
  Rng rng(6);
  const ActorBatch b = objective_gradients(PolicyParams::zeros(3, 2), CriticWeights::zeros(2, 3, 1.0), m,
                                           one_hot_features(m), 0, 16, rng);
  EXPECT_EQ(b.gradients.grads.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(b.gradients.batch_size, 16);
}

TEST(ObjectiveGradients, DuplicatedObjective) {
  MomdpSpec m = build_random_momdp(3, 2, 2, 0.9, 1.0, 2);
  m.rewards[1] = m.rewards[0];
  CriticWeights critic{MatrixXd::Zero(2, 3), 20.0};
  critic.weights.row(0) << 1.0, 2.0, 3.0;
  critic.weights.row(1) = critic.weights.row(0);
  Rng rng(7);
  const ActorBatch b = objective_gradients(PolicyParams::zeros(3, 2), critic, m, one_hot_features(m), 0, 32, rng);
  EXPECT_EQ(b.gradients.grads.row(0), b.gradients.grads.row(1));
}

TEST(ObjectiveGradients, NormBound) {
  const MomdpSpec m = build_random_momdp(4, 3, 2, 0.9, 1.0, 3);
  const double radius = default_critic_radius(m);
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const PolicyParams p = testing::random_policy(4, 3, rng, 3.0);
    CriticWeights critic{testing::gaussian_matrix(2, 4, rng), radius};
    for (int j = 0; j < 2; ++j) critic.weights.row(j) *= radius / critic.weights.row(j).norm();
    const ActorBatch b = objective_gradients(p, critic, m, one_hot_features(m), trial % 4, 8, rng);
    EXPECT_LE(b.gradients.max_norm(), gradient_bound(m, radius));
  }
}

struct BatchStats {
  MatrixXd mean;
  MatrixXd std_error;
};

BatchStats batch_stats(const MomdpSpec& m, const PolicyParams& p, const CriticWeights& critic, int batch, int reps,
                       std::uint64_t seed) {
  const VectorXd d = oracle::stationary_distribution(m, p.table());
  const FeatureMap f = one_hot_features(m);
  Rng rng(seed);
  MatrixXd sum = MatrixXd::Zero(m.n_objectives, p.dim());
  MatrixXd sum_sq = sum;
  for (int r = 0; r < reps; ++r) {
    const MatrixXd g = objective_gradients(p, critic, m, f, draw_stationary(d, rng), batch, rng).gradients.grads;
    sum += g;
    sum_sq += g.cwiseProduct(g);
  }
  BatchStats out;
  out.mean = sum / reps;
  const MatrixXd var = (sum_sq - sum.cwiseProduct(sum) / reps) / (reps - 1);
  out.std_error = (var / reps).cwiseSqrt();
  return out;
}

CriticWeights fixpoint_critic(const MomdpSpec& m, const PolicyParams& p) {
  CriticWeights c{MatrixXd(m.n_objectives, m.n_states), default_critic_radius(m)};
  for (int j = 0; j < m.n_objectives; ++j) {
    c.weights.row(j) = oracle::exact_td_fixpoint(m, p.table(), one_hot_features(m), j).transpose();
  }
  return c;
}

TEST(ObjectiveGradients, MeanMatchesEnumeratedExpectation) {
  const MomdpSpec m = build_random_momdp(3, 2, 2, 0.9, 1.0, 4);
  Rng init(9);
  const PolicyParams p = testing::random_policy(3, 2, init);
  const CriticWeights critic = fixpoint_critic(m, p);
  const MatrixXd delta = oracle::expected_actor_gradient(m, p, one_hot_features(m), critic.weights);
  const BatchStats stats = batch_stats(m, p, critic, 64, 200, 10);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < p.dim(); ++i) {
      EXPECT_LE(std::abs(stats.mean(j, i) - delta(j, i)), 3.0 * stats.std_error(j, i) + 1e-12)
          << "objective " << j << " coordinate " << i;
    }
  }
}

TEST(ObjectiveGradients, StandardErrorHalvesWhenBatchQuadruples) {
  const MomdpSpec m = build_random_momdp(3, 2, 1, 0.9, 1.0, 5);
  Rng init(11);
  const PolicyParams p = testing::random_policy(3, 2, init);
  const CriticWeights critic = fixpoint_critic(m, p);
  const double se16 = batch_stats(m, p, critic, 16, 2000, 12).std_error.norm();
  const double se64 = batch_stats(m, p, critic, 64, 2000, 13).std_error.norm();
  const double ratio = se16 / se64;
  EXPECT_GE(ratio, 2.0 / 1.5);
  EXPECT_LE(ratio, 2.0 * 1.5);
}

}  // namespace
}  // namespace firm
