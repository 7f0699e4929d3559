#ifndef FIRM_MGDA_HPP_
#define FIRM_MGDA_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "firm/actor.hpp"
#include "firm/errors.hpp"

namespace firm {

/// M x M Gram matrix of pairwise gradient inner products.
struct GramMatrix {
  MatrixXd entries;
  bool normalized = false;

  int size() const { return static_cast<int>(entries.rows()); }
};

/// A point on the probability simplex.
struct SimplexWeights {
  VectorXd lambda;

  static SimplexWeights uniform(int m) { return SimplexWeights{VectorXd::Constant(m, 1.0 / m)}; }
  int size() const { return static_cast<int>(lambda.size()); }
  bool on_simplex(double tol = 1e-9) const {
    return lambda.size() > 0 && (lambda.array() >= 0.0).all() && std::abs(lambda.sum() - 1.0) <= tol;
  }
  bool operator==(const SimplexWeights& other) const { return lambda == other.lambda; }
};

/// Settings for the local conflict-resolution QP.
///
/// Beta mode (no preference): Q = G + (beta/2) I.
/// Preference mode:           Q = G + Diag(1/p).
/// With normalize_gram, G is first rescaled to unit mean diagonal.
struct MgdaConfig {
  double beta = 0.01;
  std::optional<VectorXd> preference;
  bool normalize_gram = true;
  double tol = 1e-8;
  int max_iters = 10'000;

  bool preference_mode() const { return preference.has_value(); }

  void validate(int n_objectives = -1) const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be >= 0");
    if (!(tol > 0.0)) throw ConfigError("mgda tol must be > 0");
    if (max_iters < 1) throw ConfigError("mgda max_iters must be >= 1");
    if (preference) {
      if ((preference->array() <= 0.0).any() || !preference->allFinite()) {
        throw ConfigError("preference weights must be finite and > 0");
      }
      if (n_objectives >= 0 && preference->size() != n_objectives) {
        throw ConfigError("preference vector length must equal the number of objectives");
      }
    }
  }
};

struct MgdaSolution {
  SimplexWeights weights;
  bool converged = false;
  int iterations = 0;
  double kkt_residual = 0.0;
  double objective = 0.0;
};

/// G[i][j] = <g^i, g^j>, accumulated sequentially over the coordinates.
inline GramMatrix gram(const GradientSet& gs) {
  const int m = gs.n_objectives();
  GramMatrix out{MatrixXd::Zero(m, m), false};
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      double acc = 0.0;
      for (int k = 0; k < gs.dim(); ++k) acc += gs.grads(i, k) * gs.grads(j, k);
      out.entries(i, j) = acc;
      out.entries(j, i) = acc;
    }
  }
  return out;
}

/// Trace below which normalization is skipped (all-zero gradients).
inline constexpr double kTraceGuard = 1e-12;

/// G * M / tr(G), so the mean diagonal entry is 1. Leaves G untouched when
/// its trace is below kTraceGuard.
inline GramMatrix normalize_trace(const GramMatrix& g) {
  const double trace = g.entries.trace();
  if (!(trace > kTraceGuard)) return GramMatrix{g.entries, g.normalized};
  return GramMatrix{g.entries * (static_cast<double>(g.size()) / trace), true};
}

/// Assembles the regularized quadratic form Q for `config`.
inline MatrixXd regularized_form(const GramMatrix& g, const MgdaConfig& config) {
  if (!g.entries.allFinite()) throw NumericalError("Gram matrix contains NaN or Inf");
  const GramMatrix base = (config.normalize_gram && !g.normalized) ? normalize_trace(g) : g;
  MatrixXd q = base.entries;
  if (config.preference) {
    q.diagonal() += config.preference->cwiseInverse();
  } else {
    q.diagonal().array() += 0.5 * config.beta;
  }
  return q;
}

/// Euclidean projection onto the probability simplex (sort-based).
inline VectorXd project_simplex(const VectorXd& v) {
  const auto n = v.size();
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double shift = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0) shift = candidate;
  }
  return (v.array() - shift).cwiseMax(0.0).matrix();
}

/// Largest eigenvalue of the symmetric PSD matrix Q (its operator norm).
inline double operator_norm(const MatrixXd& q) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(q, Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues().cwiseAbs().maxCoeff());
}

/// Scaled KKT gap of lambda for min lambda'Q lambda over the simplex:
/// max over entries with lambda_i > tol of ((2Q lambda)_i - min_k (2Q lambda)_k),
/// divided by (1 + ||Q||).
inline double kkt_residual(const MatrixXd& q, const VectorXd& lambda, double tol, double q_norm) {
  const VectorXd grad = 2.0 * q * lambda;
  const double floor = grad.minCoeff();
  double gap = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > tol) gap = std::max(gap, grad(i) - floor);
  }
  return gap / (1.0 + q_norm);
}

namespace detail {

/// Solves the equality-constrained KKT system on the support of `lambda`.
/// Returns nothing if the solution leaves the simplex.
inline std::optional<VectorXd> polish_on_support(const MatrixXd& q, const VectorXd& lambda) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > 0.0) support.push_back(i);
  }
  const auto k = static_cast<Eigen::Index>(support.size());
  if (k == 0) return std::nullopt;
  MatrixXd system = MatrixXd::Zero(k + 1, k + 1);
  VectorXd rhs = VectorXd::Zero(k + 1);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) system(a, b) = 2.0 * q(support[a], support[b]);
    system(a, k) = -1.0;
    system(k, a) = 1.0;
  }
  rhs(k) = 1.0;
  const VectorXd x = system.completeOrthogonalDecomposition().solve(rhs);
  if (!x.allFinite()) return std::nullopt;
  VectorXd out = VectorXd::Zero(lambda.size());
  for (Eigen::Index a = 0; a < k; ++a) {
    if (x(a) < 0.0) return std::nullopt;
    out(support[a]) = x(a);
  }
  const double total = out.sum();
  if (!(std::abs(total - 1.0) < 1e-9)) return std::nullopt;
  return out / total;
}

}  // namespace detail

/// Minimizes lambda'Q lambda over the simplex.
///
/// Projected gradient descent from `init` (uniform by default) with step
/// 1/(2||Q||). Every few iterations the iterate's support is polished by an
/// exact KKT solve, which lands on the minimizer once the active set is
/// identified. Stops when the scaled KKT residual is <= tol. On hitting
/// max_iters the best iterate is returned with converged = false.
inline MgdaSolution solve_simplex_qp(const GramMatrix& g, const MgdaConfig& config,
                                     const std::optional<VectorXd>& init = std::nullopt) {
  config.validate(g.size());
  const int m = g.size();
  if (m < 1) throw ConfigError("simplex QP needs at least one objective");
  const MatrixXd q = regularized_form(g, config);
  const double q_norm = operator_norm(q);

  auto objective = [&](const VectorXd& x) { return x.dot(q * x); };
  auto finish = [&](VectorXd x, bool converged, int iters) {
    MgdaSolution out;
    out.kkt_residual = kkt_residual(q, x, config.tol, q_norm);
    out.objective = objective(x);
    out.weights = SimplexWeights{std::move(x)};
    out.converged = converged;
    out.iterations = iters;
    return out;
  };

  VectorXd lambda = init ? project_simplex(*init) : VectorXd::Constant(m, 1.0 / m);
  if (m == 1) return finish(VectorXd::Ones(1), true, 0);
  if (q_norm == 0.0) return finish(lambda, true, 0);

  const double stepsize = 1.0 / (2.0 * q_norm);
  constexpr int kCheckEvery = 10;
  for (int it = 0; it < config.max_iters; ++it) {
    if (it % kCheckEvery == 0) {
      if (kkt_residual(q, lambda, config.tol, q_norm) <= config.tol) return finish(lambda, true, it);
      if (auto polished = detail::polish_on_support(q, lambda)) {
        if (kkt_residual(q, *polished, config.tol, q_norm) <= config.tol &&
            objective(*polished) <= objective(lambda) + 1e-15 * (1.0 + std::abs(objective(lambda)))) {
          return finish(*polished, true, it);
        }
      }
    }
    lambda = project_simplex(lambda - stepsize * (2.0 * q * lambda));
  }
  const bool converged = kkt_residual(q, lambda, config.tol, q_norm) <= config.tol;
  return finish(lambda, converged, config.max_iters);
}

/// Gram assembly plus solve, the per-client MGDA step.
inline MgdaSolution solve_mgda(const GradientSet& gs, const MgdaConfig& config) {
  return solve_simplex_qp(gram(gs), config);
}

/// (1 - eta) lambda_prev + eta lambda_star.
inline SimplexWeights smooth_lambda(const SimplexWeights& prev, const SimplexWeights& star, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("smoothing eta must lie in (0, 1]");
  if (prev.size() != star.size()) throw ConfigError("smoothing inputs differ in length");
  return SimplexWeights{(1.0 - eta) * prev.lambda + eta * star.lambda};
}

/// g = sum_j lambda_j g^j.
inline VectorXd combine(const GradientSet& gs, const SimplexWeights& weights) {
  if (weights.size() != gs.n_objectives()) throw ConfigError("lambda length differs from objective count");
  VectorXd out = VectorXd::Zero(gs.dim());
  for (int j = 0; j < gs.n_objectives(); ++j) out += weights.lambda(j) * gs.grads.row(j).transpose();
  return out;
}

}  // namespace firm

#endif  // FIRM_MGDA_HPP_
