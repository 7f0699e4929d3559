#ifndef FIRM_FEDERATION_HPP_
#define FIRM_FEDERATION_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <exception>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "firm/actor.hpp"
#include "firm/critic.hpp"
#include "firm/env.hpp"
#include "firm/errors.hpp"
#include "firm/metrics.hpp"
#include "firm/mgda.hpp"
#include "firm/oracle.hpp"
#include "firm/policy.hpp"
#include "firm/rng.hpp"

namespace firm {

enum class Mode { firm, fedcmoo_a, centralized };
enum class EtaSchedule { reciprocal, constant };

inline const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::firm: return "firm";
    case Mode::fedcmoo_a: return "fedcmoo_a";
    case Mode::centralized: return "centralized";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "firm") return Mode::firm;
  if (s == "fedcmoo_a") return Mode::fedcmoo_a;
  if (s == "centralized") return Mode::centralized;
  throw ConfigError("unknown mode '" + s + "' (expected firm, fedcmoo_a or centralized)");
}

struct ProtocolConfig {
  int n_clients = 8;         // C
  int n_rounds = 16;         // T
  int local_steps = 4;       // K
  double actor_lr = 0.05;    // alpha; theory wants alpha < 1/L_J, which is unknown
  CriticSchedule critic{};
  int critic_every = 1;      // refresh the critic every n-th local step
  int batch_size = 16;       // B
  MgdaConfig mgda{};
  EtaSchedule eta_schedule = EtaSchedule::reciprocal;
  double eta_constant = 0.1;
  Mode mode = Mode::firm;
  std::uint64_t seed = 1;
  double critic_radius = 0.0;  // <= 0 selects default_critic_radius()
  bool parallel = false;
  bool per_step_stationarity = false;
  double heterogeneity = 0.0;  // 0 = every client starts from the shared rho0

  void validate(int n_objectives) const {
    if (n_clients < 1) throw ConfigError("n_clients must be >= 1");
    if (n_rounds < 0) throw ConfigError("n_rounds must be >= 0");
    if (local_steps < 0) throw ConfigError("local_steps must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(actor_lr >= 0.0)) throw ConfigError("actor_lr must be >= 0");
    if (critic_every < 1) throw ConfigError("critic_every must be >= 1");
    if (!(eta_constant > 0.0 && eta_constant <= 1.0)) throw ConfigError("eta_constant must lie in (0, 1]");
    if (!(heterogeneity >= 0.0 && heterogeneity <= 1.0)) throw ConfigError("heterogeneity must lie in [0, 1]");
    critic.validate();
    mgda.validate(n_objectives);
  }

  /// Smoothing weight for global step t >= 1.
  double eta(long t) const {
    return eta_schedule == EtaSchedule::reciprocal ? 1.0 / static_cast<double>(t) : eta_constant;
  }

  int effective_clients() const { return mode == Mode::centralized ? 1 : n_clients; }
  double radius_for(const MomdpSpec& m) const { return critic_radius > 0.0 ? critic_radius : default_critic_radius(m); }
};

struct ClientState {
  int id = 0;
  PolicyParams policy;
  CriticWeights critic;
  SimplexWeights lambda;
  int chain_state = 0;
  Rng rng;
  long local_step_count = 0;

  bool operator==(const ClientState&) const = default;
};

struct ServerState {
  PolicyParams global_policy;
  int round_index = 0;
  std::vector<ClientState> clients;
  SimplexWeights server_lambda;  // smoothed shared weights (fedcmoo_a only)
};

/// What one client's local step produced.
struct StepOutcome {
  GradientSet gradients;
  MgdaSolution solution;
  double gradient_ratio = 0.0;  // max_j ||g^j|| / R
};

/// Client state after one local step, kept for metrics.
struct StepSnapshot {
  PolicyParams policy;
  SimplexWeights lambda;
  bool solver_converged = true;
  double gradient_ratio = 0.0;
};

/// One CSV row: a (global step, client) pair.
struct StepEntry {
  int round = 0;
  long step = 0;
  int client = 0;
  VectorXd returns;  // exact J at the client's parameters
  VectorXd lambda;
  double stationarity = 0.0;
  double lambda_disagreement = 0.0;
  double lambda_disagreement_l2 = 0.0;
  double param_drift = 0.0;
  bool solver_converged = true;
  double gradient_ratio = 0.0;
};

struct RoundRecord {
  int round = 0;
  std::vector<StepEntry> entries;
  /// Exact metrics at the aggregated parameters after the round.
  double stationarity = 0.0;           // min over the simplex
  double weighted_stationarity = 0.0;  // ||grad J(theta_bar) lambda_bar||^2
  VectorXd global_returns;
  VectorXd mean_lambda;
};

struct RunLog {
  Mode mode = Mode::firm;
  int n_objectives = 0;
  std::vector<RoundRecord> rounds;
  PolicyParams final_policy;
  SimplexWeights final_lambda;
  std::vector<PolicyParams> final_client_policies;
  long gradient_sets = 0;
  long gradient_bound_violations = 0;
  double max_gradient_ratio = 0.0;
};

/// Elementwise mean of the client parameter tables.
inline PolicyParams fedavg(std::span<const PolicyParams> policies) {
  if (policies.empty()) throw ConfigError("fedavg needs at least one policy");
  for (const auto& p : policies) {
    if (p.theta.rows() != policies.front().theta.rows() || p.theta.cols() != policies.front().theta.cols()) {
      throw ConfigError("fedavg: policy shapes differ");
    }
  }
  return mean_policy(policies);
}

inline std::vector<ClientState> make_clients(const MomdpSpec& m, const FeatureMap& features,
                                             const ProtocolConfig& config) {
  std::vector<ClientState> clients;
  const int n = config.effective_clients();
  const double radius = config.radius_for(m);
  for (int c = 0; c < n; ++c) {
    ClientState client;
    client.id = c;
    client.policy = PolicyParams::zeros(m.n_states, m.n_actions);
    client.critic = centered_critic(m, features.dim, radius);
    client.lambda = SimplexWeights::uniform(m.n_objectives);
    client.rng = Rng::stream(config.seed, static_cast<std::uint64_t>(c) + 1);
    VectorXd start = m.initial_dist;
    if (config.heterogeneity > 0.0) {
      start *= 1.0 - config.heterogeneity;
      start(c % m.n_states) += config.heterogeneity;
    }
    client.chain_state = static_cast<int>(client.rng.categorical({start.data(), static_cast<std::size_t>(start.size())}));
    clients.push_back(std::move(client));
  }
  return clients;
}

/// Critic refresh (every `critic_every` steps) followed by a fresh actor batch.
inline GradientSet collect_gradients(ClientState& client, const MomdpSpec& m, const FeatureMap& features,
                                     const ProtocolConfig& config) {
  if (client.local_step_count % config.critic_every == 0) {
    CriticResult refreshed =
        run_critic(m, features, client.policy, client.chain_state, config.critic, client.rng, client.critic);
    client.critic = std::move(refreshed.critic);
    client.chain_state = refreshed.end_state;
  }
  ActorBatch batch = objective_gradients(client.policy, client.critic, m, features, client.chain_state,
                                         config.batch_size, client.rng);
  client.chain_state = batch.end_state;
  return std::move(batch.gradients);
}

/// theta <- theta + alpha * sum_j lambda_j g^j (ascent on the returns).
inline void apply_update(ClientState& client, const GradientSet& gradients, const ProtocolConfig& config) {
  client.policy.add_flat(combine(gradients, client.lambda), config.actor_lr);
  ++client.local_step_count;
}

/// One FIRM local step: gradients, local regularized MGDA, smoothing with
/// eta_t at global step t, combination and parameter update.
inline StepOutcome local_step(ClientState& client, const MomdpSpec& m, const FeatureMap& features,
                              const ProtocolConfig& config, long global_step) {
  StepOutcome out;
  out.gradients = collect_gradients(client, m, features, config);
  out.gradient_ratio = out.gradients.max_norm() / gradient_bound(m, client.critic.radius);
  out.solution = solve_mgda(out.gradients, config.mgda);
  client.lambda = smooth_lambda(client.lambda, out.solution.weights, config.eta(global_step));
  apply_update(client, out.gradients, config);
  return out;
}

namespace detail {

/// Runs fn(c) for every client, on worker threads when `parallel`.
/// Exceptions are rethrown on the calling thread (lowest client id first).
inline void for_each_client(std::size_t n, bool parallel, const std::function<void(std::size_t)>& fn) {
  if (!parallel || n < 2) {
    for (std::size_t c = 0; c < n; ++c) fn(c);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> workers;
  workers.reserve(n);
  for (std::size_t c = 0; c < n; ++c) {
    workers.emplace_back([&, c] {
      try {
        fn(c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename Fn>
auto with_context(int round, long step, Fn&& fn) {
  const std::string where = "round " + std::to_string(round) + ", step " + std::to_string(step) + ": ";
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(where + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(where + e.what());
  }
}

}  // namespace detail

/// FedCMOO-A local phase for one step: every client computes its M
/// gradients, the server solves one QP on the per-objective average,
/// smooths the shared weights and broadcasts them; every client combines its
/// own gradients with the shared weights.
inline std::vector<StepOutcome> fedcmoo_a_step(ServerState& server, const MomdpSpec& m, const FeatureMap& features,
                                               const ProtocolConfig& config, long global_step) {
  auto& clients = server.clients;
  std::vector<StepOutcome> out(clients.size());
  detail::for_each_client(clients.size(), config.parallel, [&](std::size_t c) {
    out[c].gradients = collect_gradients(clients[c], m, features, config);
    out[c].gradient_ratio = out[c].gradients.max_norm() / gradient_bound(m, clients[c].critic.radius);
  });
  GradientSet averaged{MatrixXd::Zero(m.n_objectives, clients.front().policy.dim()), config.batch_size};
  for (const auto& o : out) averaged.grads += o.gradients.grads;
  averaged.grads /= static_cast<double>(clients.size());
  const MgdaSolution solution = solve_mgda(averaged, config.mgda);
  server.server_lambda = smooth_lambda(server.server_lambda, solution.weights, config.eta(global_step));
  for (std::size_t c = 0; c < clients.size(); ++c) {
    out[c].solution = solution;
    clients[c].lambda = server.server_lambda;
    apply_update(clients[c], out[c].gradients, config);
  }
  return out;
}

/// Exact metrics for one global step across all clients.
inline void fill_step_metrics(std::span<StepEntry> entries, std::span<const StepSnapshot> snaps, const MomdpSpec& m,
                              bool per_step_stationarity) {
  std::vector<PolicyParams> policies;
  std::vector<SimplexWeights> lambdas;
  for (const auto& s : snaps) {
    policies.push_back(s.policy);
    lambdas.push_back(s.lambda);
  }
  const double disagreement = lambda_disagreement(lambdas);
  const double disagreement_l2 = lambda_disagreement_l2(lambdas);
  const double drift = param_drift(policies);
  double stationarity = 0.0;
  if (per_step_stationarity) {
    stationarity = pareto_stationarity(oracle::exact_policy_gradient(m, mean_policy(policies)));
  }
  for (std::size_t c = 0; c < snaps.size(); ++c) {
    entries[c].returns = oracle::exact_return(m, snaps[c].policy);
    entries[c].lambda = snaps[c].lambda.lambda;
    entries[c].lambda_disagreement = disagreement;
    entries[c].lambda_disagreement_l2 = disagreement_l2;
    entries[c].param_drift = drift;
    entries[c].solver_converged = snaps[c].solver_converged;
    entries[c].gradient_ratio = snaps[c].gradient_ratio;
    if (per_step_stationarity) entries[c].stationarity = stationarity;
  }
}

inline ServerState make_server(const MomdpSpec& m, const FeatureMap& features, const ProtocolConfig& config) {
  ServerState server;
  server.global_policy = PolicyParams::zeros(m.n_states, m.n_actions);
  server.clients = make_clients(m, features, config);
  server.server_lambda = SimplexWeights::uniform(m.n_objectives);
  return server;
}

/// One communication round: broadcast, K local steps per client, FedAvg.
inline RoundRecord run_round(ServerState& server, const MomdpSpec& m, const FeatureMap& features,
                             const ProtocolConfig& config) {
  const int round = server.round_index;
  const std::size_t n = server.clients.size();
  const int k_steps = config.local_steps;

  for (auto& client : server.clients) client.policy = server.global_policy;

  // snaps[k][c]
  std::vector<std::vector<StepSnapshot>> snaps(static_cast<std::size_t>(k_steps), std::vector<StepSnapshot>(n));
  auto snapshot = [](const ClientState& client, const StepOutcome& o) {
    return StepSnapshot{client.policy, client.lambda, o.solution.converged, o.gradient_ratio};
  };
  if (config.mode == Mode::fedcmoo_a) {
    for (int k = 0; k < k_steps; ++k) {
      const long t = static_cast<long>(round) * k_steps + k + 1;
      const auto outcomes = detail::with_context(round, t, [&] { return fedcmoo_a_step(server, m, features, config, t); });
      for (std::size_t c = 0; c < n; ++c) snaps[static_cast<std::size_t>(k)][c] = snapshot(server.clients[c], outcomes[c]);
    }
  } else {
    detail::for_each_client(n, config.parallel, [&](std::size_t c) {
      for (int k = 0; k < k_steps; ++k) {
        const long t = static_cast<long>(round) * k_steps + k + 1;
        const StepOutcome o =
            detail::with_context(round, t, [&] { return local_step(server.clients[c], m, features, config, t); });
        snaps[static_cast<std::size_t>(k)][c] = snapshot(server.clients[c], o);
      }
    });
  }

  std::vector<PolicyParams> policies;
  for (const auto& client : server.clients) policies.push_back(client.policy);
  server.global_policy = fedavg(policies);
  ++server.round_index;

  RoundRecord record;
  record.round = round;
  std::vector<SimplexWeights> lambdas;
  for (const auto& client : server.clients) lambdas.push_back(client.lambda);
  record.mean_lambda = mean_lambda(lambdas);
  const MatrixXd grad = oracle::exact_policy_gradient(m, server.global_policy);
  record.stationarity = pareto_stationarity(grad);
  record.weighted_stationarity = weighted_stationarity(grad, record.mean_lambda);
  record.global_returns = oracle::exact_return(m, server.global_policy);

  for (int k = 0; k < k_steps; ++k) {
    std::vector<StepEntry> entries(n);
    for (std::size_t c = 0; c < n; ++c) {
      entries[c].round = round;
      entries[c].step = static_cast<long>(round) * k_steps + k + 1;
      entries[c].client = static_cast<int>(c);
      entries[c].stationarity = record.stationarity;
    }
    fill_step_metrics(entries, snaps[static_cast<std::size_t>(k)], m, config.per_step_stationarity);
    for (auto& e : entries) record.entries.push_back(std::move(e));
  }
  return record;
}

/// Full experiment: T rounds in the configured mode. Deterministic in
/// config.seed regardless of config.parallel.
inline RunLog run_experiment(const ProtocolConfig& config, const MomdpSpec& m) {
  validate(m);
  config.validate(m.n_objectives);
  const FeatureMap features = one_hot_features(m);
  ServerState server = make_server(m, features, config);
  RunLog log;
  log.mode = config.mode;
  log.n_objectives = m.n_objectives;
  for (int r = 0; r < config.n_rounds; ++r) {
    RoundRecord record = run_round(server, m, features, config);
    for (const auto& e : record.entries) {
      ++log.gradient_sets;
      if (e.gradient_ratio > 1.0 + 1e-12) ++log.gradient_bound_violations;
      log.max_gradient_ratio = std::max(log.max_gradient_ratio, e.gradient_ratio);
    }
    log.rounds.push_back(std::move(record));
  }
  log.final_policy = server.global_policy;
  std::vector<SimplexWeights> lambdas;
  for (const auto& client : server.clients) {
    lambdas.push_back(client.lambda);
    log.final_client_policies.push_back(client.policy);
  }
  log.final_lambda = SimplexWeights{mean_lambda(lambdas)};
  return log;
}

}  // namespace firm

#endif  // FIRM_FEDERATION_HPP_
