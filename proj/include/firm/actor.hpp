#ifndef FIRM_ACTOR_HPP_
#define FIRM_ACTOR_HPP_

#include <Eigen/Dense>

#include <algorithm>

#include "firm/critic.hpp"
#include "firm/env.hpp"
#include "firm/policy.hpp"
#include "firm/rng.hpp"

namespace firm {

/// Per-objective stochastic policy gradients; row j is g^j.
struct GradientSet {
  MatrixXd grads;  // M x d
  int batch_size = 0;

  int n_objectives() const { return static_cast<int>(grads.rows()); }
  int dim() const { return static_cast<int>(grads.cols()); }
  double max_norm() const { return grads.rowwise().norm().maxCoeff(); }
};

/// R = C_psi (r_max + (1 + gamma) R_w): bound on every ||g^j||_2.
inline double gradient_bound(const MomdpSpec& m, double critic_radius) {
  return kScoreBound * (m.r_max + (1.0 + m.gamma) * critic_radius);
}

struct ActorBatch {
  GradientSet gradients;
  int end_state = 0;
};

/// g^j = (1/B) sum_l delta^j_l psi(s_l, a_l) over B consecutive transitions
/// continuing the chain from `start_state`. One trajectory feeds all M
/// objectives.
inline ActorBatch objective_gradients(const PolicyParams& policy, const CriticWeights& critic, const MomdpSpec& m,
                                      const FeatureMap& features, int start_state, int batch_size, Rng& rng) {
  if (batch_size < 1) throw ConfigError("actor batch size must be >= 1");
  ActorBatch out;
  out.gradients.grads = MatrixXd::Zero(m.n_objectives, policy.dim());
  out.gradients.batch_size = batch_size;
  int state = start_state;
  for (int l = 0; l < batch_size; ++l) {
    const int action = sample_action(policy, state, rng);
    const TransitionSample sample = step(m, state, action, rng);
    const VectorXd psi = score(policy, state, action);
    for (int j = 0; j < m.n_objectives; ++j) {
      const double delta = td_error(critic.weights.row(j).transpose(), features, sample, j, m.gamma);
      out.gradients.grads.row(j) += delta * psi.transpose();
    }
    state = sample.next_state;
  }
  out.gradients.grads /= static_cast<double>(batch_size);
  out.end_state = state;
  return out;
}

}  // namespace firm

#endif  // FIRM_ACTOR_HPP_
