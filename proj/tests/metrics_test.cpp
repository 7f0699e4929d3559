#include <gtest/gtest.h>

#include <algorithm>

#include "firm/metrics.hpp"
#include "firm/oracle.hpp"
#include "test_util.hpp"

namespace firm {
namespace {

SimplexWeights sw(std::initializer_list<double> v) {
  VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x(i++) = d;
  return SimplexWeights{x};
}

TEST(ParetoStationarity, OpposingObjectivesCancel) {
  Rng rng(1);
  const VectorXd g = testing::gaussian_matrix(5, 1, rng);
  MatrixXd grad(5, 2);
  grad << g, -g;
  EXPECT_NEAR(pareto_stationarity(grad), 0.0, 1e-12);
}

TEST(ParetoStationarity, SingleObjective) {
  Rng rng(2);
  const MatrixXd grad = testing::gaussian_matrix(6, 1, rng);
  EXPECT_NEAR(pareto_stationarity(grad), grad.squaredNorm(), 1e-12);
}

TEST(ParetoStationarity, MatchesGridAndVertexBound) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const MatrixXd grad = testing::gaussian_matrix(7, 2, rng);
    const double value = pareto_stationarity(grad);
    const MatrixXd q = grad.transpose() * grad;
    // Never worse than the coarse grid; agrees with a fine grid to 1e-6.
    EXPECT_LE(value, testing::grid_minimum(q, 1e-3).second + 1e-6);
    EXPECT_NEAR(value, testing::grid_minimum(q, 1e-6).second, 1e-6);
    EXPECT_GE(value, 0.0);
    EXPECT_LE(value, grad.colwise().squaredNorm().minCoeff() + 1e-12);
  }
}

TEST(ParetoStationarity, OnExactGradients) {
  Rng rng(4);
  const MomdpSpec m = build_random_momdp(4, 3, 3, 0.9, 1.0, 5);
  const MatrixXd grad = oracle::exact_policy_gradient(m, testing::random_policy(4, 3, rng));
  const double value = pareto_stationarity(grad);
  EXPECT_LE(value, testing::grid_minimum(grad.transpose() * grad, 1e-3).second + 1e-6);
}

TEST(LambdaDisagreement, Examples) {
  const std::vector<SimplexWeights> same{sw({0.3, 0.7}), sw({0.3, 0.7}), sw({0.3, 0.7})};
  EXPECT_EQ(lambda_disagreement(same), 0.0);
  const std::vector<SimplexWeights> split{sw({1, 0}), sw({0, 1})};
  EXPECT_DOUBLE_EQ(lambda_disagreement(split), 1.0);
  EXPECT_DOUBLE_EQ(lambda_disagreement_l2(split), std::sqrt(0.5));
}

TEST(LambdaDisagreement, PermutationInvariant) {
  Rng rng(5);
  std::vector<SimplexWeights> l;
  for (int c = 0; c < 5; ++c) l.push_back(SimplexWeights{project_simplex(testing::gaussian_matrix(3, 1, rng))});
  const double a = lambda_disagreement(l);
  std::reverse(l.begin(), l.end());
  EXPECT_NEAR(lambda_disagreement(l), a, 1e-15);
}

TEST(ParamDrift, Examples) {
  Rng rng(6);
  const PolicyParams v = testing::random_policy(3, 2, rng);
  const std::vector<PolicyParams> same{v, v};
  EXPECT_EQ(param_drift(same), 0.0);
  const std::vector<PolicyParams> opposite{v, PolicyParams(-v.theta)};
  EXPECT_NEAR(param_drift(opposite), v.theta.norm(), 1e-14);
}

TEST(LemmaTrial, IdenticalSetsGiveZero) {
  Rng rng(7);
  const GradientSet a{testing::gaussian_matrix(2, 8, rng), 1};
  const LemmaTrial t = lemma_trial(a, a, 0.1);
  EXPECT_EQ(t.lhs, 0.0);
  EXPECT_EQ(t.ratio(), 0.0);
}

TEST(LemmaStabilityCheck, BoundHoldsSmall) {
  const LemmaCheckReport r = lemma_stability_check(200, 2, 8, 0.1, 3);
  EXPECT_EQ(r.trials, 200);
  EXPECT_TRUE(r.pass) << r.max_ratio;
  EXPECT_GT(r.R_used, 0.0);
  EXPECT_THROW(lemma_stability_check(10, 2, 8, 0.0, 3), ConfigError);
}

TEST(VarianceSpeedupCheck, EstimatesAreStable) {
  const MomdpSpec m = build_random_momdp(4, 2, 2, 0.9, 1.0, 6);
  Rng rng(8);
  const PolicyParams p = testing::random_policy(4, 2, rng);
  const std::vector<std::pair<int, int>> grid{{1, 16}};
  const double a = variance_speedup_check(m, p, grid, 500, 1).front().variance;
  const double b = variance_speedup_check(m, p, grid, 1000, 2).front().variance;
  EXPECT_LT(std::abs(a - b) / b, 0.3);
}

TEST(VarianceSpeedupCheck, QuadruplingReducesVariance) {
  const MomdpSpec m = build_random_momdp(4, 2, 2, 0.9, 1.0, 7);
  Rng rng(9);
  const PolicyParams p = testing::random_policy(4, 2, rng);
  const std::vector<std::pair<int, int>> grid{{1, 16}, {4, 16}, {1, 64}};
  const auto rows = variance_speedup_check(m, p, grid, 500, 3);
  for (int k : {1, 2}) {
    const double factor = rows[0].variance / rows[static_cast<std::size_t>(k)].variance;
    EXPECT_GE(factor, 2.0);
    EXPECT_LE(factor, 8.0);
  }
}

}  // namespace
}  // namespace firm
