#ifndef FIRM_ORACLE_HPP_
#define FIRM_ORACLE_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "firm/env.hpp"
#include "firm/errors.hpp"
#include "firm/policy.hpp"

// Exact dynamic-programming ground truth. Every routine here takes either a
// row-stochastic |S| x |A| policy table or softmax parameters and works with
// dense direct solves; environments are small enough that nothing iterative
// is needed except the stationary-distribution power iteration.

namespace firm::oracle {

struct ExactEvaluation {
  MatrixXd values;  // M x |S|
  VectorXd returns;  // M
  VectorXd stationary;
  VectorXd discounted_visitation;
};

/// Expected one-step reward of objective j under the policy, per state.
inline VectorXd policy_rewards(const MomdpSpec& m, const MatrixXd& policy, int objective) {
  return (policy.array() * m.rewards[static_cast<std::size_t>(objective)].array()).rowwise().sum();
}

/// Stationary distribution of the induced chain by power iteration.
/// Throws NumericalError when the chain does not mix within `max_iters`.
inline VectorXd stationary_distribution(const MomdpSpec& m, const MatrixXd& policy,
                                        double tol = 1e-12, int max_iters = 1'000'000) {
  const MatrixXd chain = induced_transition(m, policy);
  Eigen::RowVectorXd d = m.initial_dist.transpose();
  for (int it = 0; it < max_iters; ++it) {
    Eigen::RowVectorXd next = d * chain;
    next /= next.sum();
    const double residual = (next - d).cwiseAbs().maxCoeff();
    d = next;
    if (residual <= tol && (d * chain - d).cwiseAbs().maxCoeff() <= tol) return d.transpose();
  }
  throw NumericalError("stationary distribution did not converge; the induced chain does not mix");
}

/// V^j solving (I - gamma P_pi) V = r^j_pi.
inline VectorXd exact_values(const MomdpSpec& m, const MatrixXd& policy, int objective) {
  const MatrixXd system = MatrixXd::Identity(m.n_states, m.n_states) - m.gamma * induced_transition(m, policy);
  return system.partialPivLu().solve(policy_rewards(m, policy, objective));
}

/// J^j = gamma * rho0' V^j (the discounted sum starts at t = 1).
inline VectorXd exact_return(const MomdpSpec& m, const MatrixXd& policy) {
  VectorXd out(m.n_objectives);
  for (int j = 0; j < m.n_objectives; ++j) {
    out(j) = m.gamma * m.initial_dist.dot(exact_values(m, policy, j));
  }
  return out;
}

inline VectorXd exact_return(const MomdpSpec& m, const PolicyParams& params) {
  return exact_return(m, params.table());
}

/// Normalized discounted state visitation d = (1-gamma) rho0 + gamma P_pi' d.
inline VectorXd discounted_visitation(const MomdpSpec& m, const MatrixXd& policy) {
  const MatrixXd system =
      MatrixXd::Identity(m.n_states, m.n_states) - m.gamma * induced_transition(m, policy).transpose();
  VectorXd d = system.partialPivLu().solve((1.0 - m.gamma) * m.initial_dist);
  return d / d.sum();
}

inline ExactEvaluation evaluate(const MomdpSpec& m, const MatrixXd& policy) {
  ExactEvaluation out;
  out.values.resize(m.n_objectives, m.n_states);
  out.returns.resize(m.n_objectives);
  for (int j = 0; j < m.n_objectives; ++j) {
    const VectorXd v = exact_values(m, policy, j);
    out.values.row(j) = v.transpose();
    out.returns(j) = m.gamma * m.initial_dist.dot(v);
  }
  out.stationary = stationary_distribution(m, policy);
  out.discounted_visitation = discounted_visitation(m, policy);
  return out;
}

/// Q^j(s, a) = r^j(s, a) + gamma sum_s' P(s'|s, a) V^j(s').
inline MatrixXd exact_q_values(const MomdpSpec& m, const VectorXd& values, int objective) {
  MatrixXd q = m.rewards[static_cast<std::size_t>(objective)];
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      q(s, a) += m.gamma * m.transition.row(m.pair_index(s, a)).dot(values);
    }
  }
  return q;
}

/// d x M matrix whose column j is grad_theta J^j, via the policy gradient
/// theorem under the discounted visitation.
inline MatrixXd exact_policy_gradient(const MomdpSpec& m, const PolicyParams& params) {
  const MatrixXd policy = params.table();
  const VectorXd visitation = discounted_visitation(m, policy);
  MatrixXd grad = MatrixXd::Zero(params.dim(), m.n_objectives);
  for (int j = 0; j < m.n_objectives; ++j) {
    const MatrixXd q = exact_q_values(m, exact_values(m, policy, j), j);
    for (int s = 0; s < m.n_states; ++s) {
      // sum_a pi(a|s) psi(s,a) Q(s,a) restricted to row s is pi(.|s) * (Q(s,.) - E_pi Q(s,.)).
      const double baseline = policy.row(s).dot(q.row(s));
      for (int a = 0; a < m.n_actions; ++a) {
        grad(m.pair_index(s, a), j) += visitation(s) * policy(s, a) * (q(s, a) - baseline);
      }
    }
  }
  return grad * (m.gamma / (1.0 - m.gamma));
}

/// Linear TD fixed point A w = -b with
/// A = E_{d_pi}[phi(s) (gamma phi(s') - phi(s))'], b = E_{d_pi}[r^j phi(s)].
/// Throws NumericalError if A is singular.
inline VectorXd exact_td_fixpoint(const MomdpSpec& m, const MatrixXd& policy, const FeatureMap& features,
                                  int objective) {
  const VectorXd d = stationary_distribution(m, policy);
  const int dim = features.dim;
  MatrixXd a_mat = MatrixXd::Zero(dim, dim);
  VectorXd b = VectorXd::Zero(dim);
  for (int s = 0; s < m.n_states; ++s) {
    const VectorXd phi_s = features.phi(s);
    for (int a = 0; a < m.n_actions; ++a) {
      const double weight = d(s) * policy(s, a);
      if (weight == 0.0) continue;
      b += weight * m.reward(objective, s, a) * phi_s;
      VectorXd next_feature = VectorXd::Zero(dim);
      for (int next = 0; next < m.n_states; ++next) next_feature += m.p(s, a, next) * features.phi(next);
      a_mat += weight * phi_s * (m.gamma * next_feature - phi_s).transpose();
    }
  }
  Eigen::FullPivLU<MatrixXd> lu(a_mat);
  if (!lu.isInvertible()) throw NumericalError("TD system matrix is singular");
  return lu.solve(-b);
}

/// Delta^j = E_{s~d_pi, a~pi, s'~P}[psi(s,a) delta^j(w)], enumerated exactly.
/// `critic` holds one weight row per objective; the result is M x d.
inline MatrixXd expected_actor_gradient(const MomdpSpec& m, const PolicyParams& params,
                                        const FeatureMap& features, const MatrixXd& critic) {
  const MatrixXd policy = params.table();
  const VectorXd d = stationary_distribution(m, policy);
  MatrixXd out = MatrixXd::Zero(m.n_objectives, params.dim());
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      const VectorXd psi = score(params, s, a);
      for (int next = 0; next < m.n_states; ++next) {
        const double weight = d(s) * policy(s, a) * m.p(s, a, next);
        for (int j = 0; j < m.n_objectives; ++j) {
          const double delta = m.reward(j, s, a) + m.gamma * features.phi(next).dot(critic.row(j)) -
                               features.phi(s).dot(critic.row(j));
          out.row(j) += weight * delta * psi.transpose();
        }
      }
    }
  }
  return out;
}

}  // namespace firm::oracle

#endif  // FIRM_ORACLE_HPP_
