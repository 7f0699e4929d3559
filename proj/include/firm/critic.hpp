#ifndef FIRM_CRITIC_HPP_
#define FIRM_CRITIC_HPP_

#include <Eigen/Dense>

#include <cassert>

#include "firm/env.hpp"
#include "firm/errors.hpp"
#include "firm/policy.hpp"
#include "firm/rng.hpp"

namespace firm {

/// M linear value-function critics, one row w^j per objective, constrained to
/// the origin-centred ball of radius R_w.
struct CriticWeights {
  MatrixXd weights;  // M x d
  double radius = 1.0;

  static CriticWeights zeros(int n_objectives, int feature_dim, double radius) {
    return CriticWeights{MatrixXd::Zero(n_objectives, feature_dim), radius};
  }

  bool operator==(const CriticWeights&) const = default;
};

struct CriticSchedule {
  int n_iters = 50;        // N
  int batch_size = 8;      // D
  double stepsize = 0.1;   // alpha'

  void validate() const {
    if (n_iters < 0) throw ConfigError("critic n_iters must be >= 0");
    if (batch_size < 1) throw ConfigError("critic batch_size must be >= 1");
    if (!(stepsize > 0.0)) throw ConfigError("critic stepsize must be > 0");
  }
};

/// Default projection radius 2 r_max / (1 - gamma). For one-hot features the
/// TD fixed point satisfies ||w*||_inf <= r_max / (1 - gamma), so the ball
/// always contains it.
inline double default_critic_radius(const MomdpSpec& m) { return 2.0 * m.r_max / (1.0 - m.gamma); }

/// delta = r + gamma phi(s')'w - phi(s)'w.
inline double td_error(const Eigen::Ref<const VectorXd>& w, const Eigen::Ref<const VectorXd>& phi_state,
                       const Eigen::Ref<const VectorXd>& phi_next, double reward, double gamma) {
  return reward + gamma * phi_next.dot(w) - phi_state.dot(w);
}

inline double td_error(const Eigen::Ref<const VectorXd>& w, const FeatureMap& features,
                       const TransitionSample& sample, int objective, double gamma) {
  return td_error(w, features.phi(sample.state), features.phi(sample.next_state), sample.reward_vec(objective),
                  gamma);
}

/// Euclidean projection onto {w : ||w||_2 <= radius}.
inline VectorXd project_ball(const VectorXd& w, double radius) {
  const double norm = w.norm();
  if (norm <= radius) return w;
  return w * (radius / norm);
}

/// Every coordinate at r_max / (2 (1 - gamma)), the centre of the range the
/// one-hot fixed point can occupy, projected into the ball.
inline CriticWeights centered_critic(const MomdpSpec& m, int feature_dim, double radius) {
  CriticWeights c{MatrixXd::Constant(m.n_objectives, feature_dim, m.r_max / (2.0 * (1.0 - m.gamma))), radius};
  for (int j = 0; j < m.n_objectives; ++j) {
    const VectorXd row = c.weights.row(j).transpose();
    c.weights.row(j) = project_ball(row, radius).transpose();
  }
  return c;
}

struct CriticResult {
  CriticWeights critic;
  int end_state = 0;
  long transitions = 0;
};

/// Mini-batch Markovian TD(0) for all M objectives.
///
/// Runs `n_iters` outer iterations; each consumes `batch_size` consecutive
/// transitions of the chain driven by `policy` (continuing where the previous
/// batch stopped) and applies
///   w^j <- Proj(w^j + (alpha'/D) sum_tau delta^j_tau phi(s_tau))
/// to every objective. Starts from `initial` (warm start) and returns the
/// state the chain reached.
inline CriticResult run_critic(const MomdpSpec& m, const FeatureMap& features, const PolicyParams& policy,
                               int start_state, const CriticSchedule& schedule, Rng& rng,
                               const CriticWeights& initial) {
  schedule.validate();
  CriticResult out{initial, start_state, 0};
  MatrixXd& w = out.critic.weights;
  MatrixXd increment(w.rows(), w.cols());
  int state = start_state;
  for (int k = 0; k < schedule.n_iters; ++k) {
    increment.setZero();
    for (int tau = 0; tau < schedule.batch_size; ++tau) {
      const int action = sample_action(policy, state, rng);
      const TransitionSample sample = step(m, state, action, rng);
      for (int j = 0; j < m.n_objectives; ++j) {
        const double delta = td_error(w.row(j).transpose(), features, sample, j, m.gamma);
        increment.row(j) += delta * features.phi(sample.state).transpose();
      }
      state = sample.next_state;
      ++out.transitions;
    }
    for (int j = 0; j < m.n_objectives; ++j) {
      const VectorXd updated = w.row(j).transpose() + (schedule.stepsize / schedule.batch_size) * increment.row(j).transpose();
      w.row(j) = project_ball(updated, out.critic.radius).transpose();
      assert(w.row(j).norm() <= out.critic.radius * (1.0 + 1e-12));
    }
  }
  out.end_state = state;
  return out;
}

}  // namespace firm

#endif  // FIRM_CRITIC_HPP_
