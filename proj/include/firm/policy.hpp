#ifndef FIRM_POLICY_HPP_
#define FIRM_POLICY_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "firm/env.hpp"
#include "firm/rng.hpp"

namespace firm {

/// Tabular softmax policy parameters theta, |S| x |A|.
///
/// The flattened view used for gradients and aggregation is row-major:
/// entry (s, a) lives at index s*|A| + a, matching MomdpSpec::pair_index.
struct PolicyParams {
  MatrixXd theta;

  PolicyParams() = default;
  explicit PolicyParams(MatrixXd t) : theta(std::move(t)) {}
  static PolicyParams zeros(int n_states, int n_actions) {
    return PolicyParams(MatrixXd::Zero(n_states, n_actions));
  }

  int n_states() const { return static_cast<int>(theta.rows()); }
  int n_actions() const { return static_cast<int>(theta.cols()); }
  int dim() const { return static_cast<int>(theta.size()); }

  double flat(int i) const { return theta(i / n_actions(), i % n_actions()); }
  double& flat(int i) { return theta(i / n_actions(), i % n_actions()); }

  /// pi(.|s), computed with the row maximum subtracted.
  VectorXd probabilities(int s) const {
    const auto row = theta.row(s);
    VectorXd p = (row.array() - row.maxCoeff()).exp().transpose();
    return p / p.sum();
  }

  /// Full |S| x |A| row-stochastic policy table.
  MatrixXd table() const {
    MatrixXd out(theta.rows(), theta.cols());
    for (int s = 0; s < n_states(); ++s) out.row(s) = probabilities(s).transpose();
    return out;
  }

  /// theta += step * direction, with `direction` in the flattened layout.
  void add_flat(const VectorXd& direction, double step) {
    for (int i = 0; i < dim(); ++i) flat(i) += step * direction(i);
  }

  bool operator==(const PolicyParams& other) const { return theta == other.theta; }
};

/// Uniform bound C_psi on the tabular-softmax score norm.
inline constexpr double kScoreBound = std::numbers::sqrt2;

inline int sample_action(const PolicyParams& policy, int state, Rng& rng) {
  const VectorXd p = policy.probabilities(state);
  return static_cast<int>(rng.categorical({p.data(), static_cast<std::size_t>(p.size())}));
}

/// psi(s, a) = grad_theta log pi(a|s): (1 - pi(a|s)) at (s, a), -pi(a'|s) at
/// (s, a'), zero on every other state's row.
inline VectorXd score(const PolicyParams& policy, int state, int action) {
  VectorXd psi = VectorXd::Zero(policy.dim());
  const VectorXd p = policy.probabilities(state);
  const int base = state * policy.n_actions();
  for (int a = 0; a < policy.n_actions(); ++a) psi(base + a) = -p(a);
  psi(base + action) += 1.0;
  return psi;
}

}  // namespace firm

#endif  // FIRM_POLICY_HPP_
