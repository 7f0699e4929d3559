#include <gtest/gtest.h>

#include "firm/critic.hpp"
#include "firm/oracle.hpp"
#include "test_util.hpp"

namespace firm {
namespace {

using testing::make_momdp;

MomdpSpec single_state(double reward, double gamma, int n_actions = 1) {
  return make_momdp(MatrixXd::Ones(n_actions, 1), {MatrixXd::Constant(1, n_actions, reward)}, gamma);
}

MomdpSpec two_state_chain(const MatrixXd& p_pi) {
  return make_momdp(p_pi, {MatrixXd::Zero(2, 1)}, 0.9);
}

TEST(StationaryDistribution, SingleState) {
  const MomdpSpec m = single_state(1.0, 0.5);
  EXPECT_NEAR(oracle::stationary_distribution(m, MatrixXd::Ones(1, 1))(0), 1.0, 1e-15);
}

TEST(StationaryDistribution, SymmetricChain) {
  const MomdpSpec m = two_state_chain(MatrixXd::Constant(2, 2, 0.5));
  const VectorXd d = oracle::stationary_distribution(m, MatrixXd::Ones(2, 1));
  EXPECT_NEAR(d(0), 0.5, 1e-12);
  EXPECT_NEAR(d(1), 0.5, 1e-12);
}

TEST(StationaryDistribution, TwoByTwoEigenproblem) {
  MatrixXd p(2, 2);
  p << 0.9, 0.1, 0.5, 0.5;
  const MomdpSpec m = two_state_chain(p);
  const VectorXd d = oracle::stationary_distribution(m, MatrixXd::Ones(2, 1));
  // Balance 0.1 d0 = 0.5 d1 gives d = [5/6, 1/6].
  EXPECT_NEAR(d(0), 5.0 / 6.0, 1e-11);
  EXPECT_NEAR(d(1), 1.0 / 6.0, 1e-11);
  EXPECT_LE((d.transpose() * p - d.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StationaryDistribution, ThrowsOnPeriodicChain) {
  MatrixXd swap(2, 2);
  swap << 0, 1, 1, 0;
  MomdpSpec m = two_state_chain(swap);
  m.initial_dist << 1.0, 0.0;
  EXPECT_THROW(oracle::stationary_distribution(m, MatrixXd::Ones(2, 1), 1e-12, 1000), NumericalError);
}

TEST(ExactValues, GeometricSeries) {
  const MomdpSpec m = single_state(1.0, 0.5);
  EXPECT_NEAR(oracle::exact_values(m, MatrixXd::Ones(1, 1), 0)(0), 2.0, 1e-14);
  EXPECT_NEAR(oracle::exact_return(m, MatrixXd::Ones(1, 1))(0), 1.0, 1e-14);
}

TEST(ExactValues, ZeroRewards) {
  MomdpSpec m = build_random_momdp(4, 2, 2, 0.9, 1.0, 3);
  for (auto& r : m.rewards) r.setZero();
  const MatrixXd pi = MatrixXd::Constant(4, 2, 0.5);
  EXPECT_EQ(oracle::exact_values(m, pi, 1).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(oracle::exact_return(m, pi).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(oracle::exact_policy_gradient(m, PolicyParams::zeros(4, 2)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(oracle::exact_td_fixpoint(m, pi, one_hot_features(m), 0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ExactValues, BellmanResidualAndBounds) {
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const MomdpSpec m = build_random_momdp(4, 3, 2, 0.9, 1.0, seed);
    const PolicyParams params = testing::random_policy(4, 3, rng, 2.0);
    const MatrixXd pi = params.table();
    // Bellman operator written out per state, independent of the solver.
    for (int j = 0; j < 2; ++j) {
      const VectorXd v = oracle::exact_values(m, pi, j);
      for (int s = 0; s < 4; ++s) {
        double backup = 0.0;
        for (int a = 0; a < 3; ++a) {
          double next = 0.0;
          for (int t = 0; t < 4; ++t) next += m.p(s, a, t) * v(t);
          backup += pi(s, a) * (m.reward(j, s, a) + m.gamma * next);
        }
        EXPECT_NEAR(v(s), backup, 1e-10);
        EXPECT_GE(v(s), 0.0);
        EXPECT_LE(v(s), m.r_max / (1.0 - m.gamma) + 1e-12);
      }
    }
    const VectorXd j = oracle::exact_return(m, pi);
    EXPECT_TRUE((j.array() >= 0.0).all());
    EXPECT_TRUE((j.array() <= m.gamma * m.r_max / (1.0 - m.gamma) + 1e-12).all());
  }
}

TEST(ExactReturn, MatchesTruncatedRollout) {
  const MomdpSpec m = build_random_momdp(3, 2, 2, 0.8, 1.0, 9);
  const MatrixXd pi = (MatrixXd(3, 2) << 0.3, 0.7, 0.5, 0.5, 0.9, 0.1).finished();
  // Forward distribution propagation; rewards from t = 1 onward.
  Eigen::RowVectorXd dist = m.initial_dist.transpose();
  VectorXd expected = VectorXd::Zero(2);
  double discount = m.gamma;
  for (int t = 0; t < 400; ++t) {
    for (int j = 0; j < 2; ++j) expected(j) += discount * dist.dot(oracle::policy_rewards(m, pi, j));
    dist = dist * induced_transition(m, pi);
    discount *= m.gamma;
  }
  EXPECT_LE((oracle::exact_return(m, pi) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DiscountedVisitation, Properties) {
  const MomdpSpec one = single_state(1.0, 0.5);
  EXPECT_NEAR(oracle::discounted_visitation(one, MatrixXd::Ones(1, 1))(0), 1.0, 1e-15);

  MomdpSpec m = build_random_momdp(5, 2, 1, 0.01, 1.0, 4);
  m.initial_dist << 0.6, 0.1, 0.1, 0.1, 0.1;
  const MatrixXd pi = MatrixXd::Constant(5, 2, 0.5);
  const VectorXd d = oracle::discounted_visitation(m, pi);
  EXPECT_LE(0.5 * (d - m.initial_dist).cwiseAbs().sum(), 0.02);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MomdpSpec r = build_random_momdp(6, 3, 1, 0.95, 1.0, seed);
    EXPECT_NEAR(oracle::discounted_visitation(r, MatrixXd::Constant(6, 3, 1.0 / 3)).sum(), 1.0, 1e-10);
    EXPECT_NEAR(oracle::stationary_distribution(r, MatrixXd::Constant(6, 3, 1.0 / 3)).sum(), 1.0, 1e-10);
  }
}

MatrixXd finite_difference_gradient(const MomdpSpec& m, const PolicyParams& params, double h) {
  MatrixXd out(params.dim(), m.n_objectives);
  for (int i = 0; i < params.dim(); ++i) {
    PolicyParams plus = params;
    PolicyParams minus = params;
    plus.flat(i) += h;
    minus.flat(i) -= h;
    out.row(i) = ((oracle::exact_return(m, plus) - oracle::exact_return(m, minus)) / (2.0 * h)).transpose();
  }
  return out;
}

TEST(ExactPolicyGradient, SingleStateIdenticalActions) {
  const MomdpSpec m = single_state(0.7, 0.9, 3);
  Rng rng(2);
  const MatrixXd g = oracle::exact_policy_gradient(m, testing::random_policy(1, 3, rng));
  EXPECT_LE(g.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ExactPolicyGradient, MatchesFiniteDifferences) {
  Rng rng(17);
  const MomdpSpec m = build_random_momdp(3, 2, 2, 0.9, 1.0, 21);
  const PolicyParams params = testing::random_policy(3, 2, rng);
  const MatrixXd exact = oracle::exact_policy_gradient(m, params);
  ASSERT_EQ(exact.rows(), 6);
  ASSERT_EQ(exact.cols(), 2);
  EXPECT_LE((exact - finite_difference_gradient(m, params, 1e-5)).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(ExactPolicyGradient, MatchesFiniteDifferencesLargestShape) {
  Rng rng(18);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MomdpSpec m = build_random_momdp(6, 3, 3, 0.9, 1.0, seed);
    const PolicyParams params = testing::random_policy(6, 3, rng, 1.5);
    const MatrixXd exact = oracle::exact_policy_gradient(m, params);
    EXPECT_LE((exact - finite_difference_gradient(m, params, 1e-5)).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(ExactTdFixpoint, OneHotEqualsValues) {
  Rng rng(4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MomdpSpec m = build_random_momdp(4, 2, 2, 0.9, 1.0, seed);
    const MatrixXd pi = testing::random_policy(4, 2, rng).table();
    const FeatureMap f = one_hot_features(m);
    for (int j = 0; j < 2; ++j) {
      const VectorXd w = oracle::exact_td_fixpoint(m, pi, f, j);
      EXPECT_LE((w - oracle::exact_values(m, pi, j)).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LE(w.norm(), default_critic_radius(m));
    }
  }
}

TEST(ExactTdFixpoint, SingularSystemThrows) {
  const MomdpSpec m = build_random_momdp(3, 2, 1, 0.9, 1.0, 1);
  FeatureMap f{2, MatrixXd::Zero(3, 2)};
  EXPECT_THROW(oracle::exact_td_fixpoint(m, MatrixXd::Constant(3, 2, 0.5), f, 0), NumericalError);
}

TEST(ExpectedActorGradient, TrueValuesGiveAdvantageGradient) {
  // With w = V, E_d[psi (r + gamma V(s') - V(s))] = sum_s d(s) sum_a pi psi A(s,a):
  // compare with an enumeration built from exact_q_values.
  Rng rng(6);
  const MomdpSpec m = build_random_momdp(4, 3, 2, 0.9, 1.0, 7);
  const PolicyParams params = testing::random_policy(4, 3, rng);
  const MatrixXd pi = params.table();
  const VectorXd d = oracle::stationary_distribution(m, pi);
  MatrixXd critic(2, 4);
  MatrixXd expected = MatrixXd::Zero(2, params.dim());
  for (int j = 0; j < 2; ++j) {
    const VectorXd v = oracle::exact_values(m, pi, j);
    critic.row(j) = v.transpose();
    const MatrixXd q = oracle::exact_q_values(m, v, j);
    for (int s = 0; s < 4; ++s) {
      for (int a = 0; a < 3; ++a) expected.row(j) += d(s) * pi(s, a) * (q(s, a) - v(s)) * score(params, s, a).transpose();
    }
  }
  const MatrixXd got = oracle::expected_actor_gradient(m, params, one_hot_features(m), critic);
  EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
}  // namespace firm
