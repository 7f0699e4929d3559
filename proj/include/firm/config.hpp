#ifndef FIRM_CONFIG_HPP_
#define FIRM_CONFIG_HPP_

#include <Eigen/Dense>

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "firm/env.hpp"
#include "firm/errors.hpp"
#include "firm/federation.hpp"

namespace firm {

/// Which environment generator to instantiate.
enum class EnvKind { random, conflicting, correlated };

struct EnvConfig {
  EnvKind kind = EnvKind::random;
  int n_states = 5;
  int n_actions = 3;
  int n_objectives = 2;
  double gamma = 0.9;
  double r_max = 1.0;
  std::uint64_t seed = 0;
  double reward_noise = 0.01;  // correlated kind only
};

struct OutputConfig {
  std::string directory = "out";
  std::string csv = "run.csv";
  int log_every = 1;
};

struct ExperimentConfig {
  EnvConfig env;
  ProtocolConfig protocol;
  OutputConfig output;
  std::vector<VectorXd> sweep_preferences;

  void validate() const {
    if (env.n_states < 1 || env.n_actions < 1 || env.n_objectives < 1) {
      throw ConfigError("env dimensions must all be >= 1");
    }
    if (env.kind == EnvKind::conflicting && env.n_objectives != 2) {
      throw ConfigError("env.kind = conflicting requires env.n_objectives = 2");
    }
    if (!(env.gamma > 0.0 && env.gamma < 1.0)) throw ConfigError("gamma must be < 1 and > 0");
    if (!(env.r_max > 0.0)) throw ConfigError("r_max must be > 0");
    if (!(env.reward_noise >= 0.0)) throw ConfigError("reward_noise must be >= 0");
    if (output.log_every < 1) throw ConfigError("log_every must be >= 1");
    protocol.validate(env.n_objectives);
    for (const auto& p : sweep_preferences) {
      if (p.size() != env.n_objectives) throw ConfigError("sweep preference length must equal n_objectives");
      if ((p.array() <= 0.0).any()) throw ConfigError("sweep preference weights must be > 0");
    }
  }
};

inline MomdpSpec build_env(const EnvConfig& env) {
  if (env.kind == EnvKind::conflicting) {
    return build_conflicting_momdp(env.n_states, env.n_actions, env.gamma, env.r_max, env.seed);
  }
  if (env.kind == EnvKind::correlated) {
    return build_correlated_momdp(env.n_states, env.n_actions, env.n_objectives, env.gamma, env.r_max,
                                  env.reward_noise, env.seed);
  }
  return build_random_momdp(env.n_states, env.n_actions, env.n_objectives, env.gamma, env.r_max, env.seed);
}

/// Experiment defaults: C = 8 clients, T = 16 rounds, beta = 0.01, B = 16.
inline ExperimentConfig default_config() { return ExperimentConfig{}; }

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_double(const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

inline long long parse_int(const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const long long out = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_u64(const std::string& v) {
  if (!v.empty() && v.front() == '-') throw ConfigError("expected a non-negative integer, got '" + v + "'");
  char* end = nullptr;
  errno = 0;
  const unsigned long long out = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

/// "4, 1" -> (4, 1)
inline VectorXd parse_vector(const std::string& v) {
  std::vector<double> values;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(parse_double(trim(item)));
  if (values.empty()) throw ConfigError("expected a comma-separated list of numbers");
  return Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// "4,1; 1,1; 1,4" -> three vectors
inline std::vector<VectorXd> parse_vector_list(const std::string& v) {
  std::vector<VectorXd> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_vector(item));
  }
  return out;
}

inline int to_int(long long v) {
  if (v < -2147483647LL || v > 2147483647LL) throw ConfigError("integer out of range");
  return static_cast<int>(v);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& config_setters() {
  static const std::map<std::string, Setter> setters = {
      {"env.kind",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "random") c.env.kind = EnvKind::random;
         else if (v == "conflicting") c.env.kind = EnvKind::conflicting;
         else if (v == "correlated") c.env.kind = EnvKind::correlated;
         else throw ConfigError("env.kind must be random, conflicting or correlated");
       }},
      {"env.n_states", [](ExperimentConfig& c, const std::string& v) { c.env.n_states = to_int(parse_int(v)); }},
      {"env.n_actions", [](ExperimentConfig& c, const std::string& v) { c.env.n_actions = to_int(parse_int(v)); }},
      {"env.n_objectives", [](ExperimentConfig& c, const std::string& v) { c.env.n_objectives = to_int(parse_int(v)); }},
      {"env.gamma", [](ExperimentConfig& c, const std::string& v) { c.env.gamma = parse_double(v); }},
      {"env.r_max", [](ExperimentConfig& c, const std::string& v) { c.env.r_max = parse_double(v); }},
      {"env.seed", [](ExperimentConfig& c, const std::string& v) { c.env.seed = parse_u64(v); }},
      {"env.reward_noise", [](ExperimentConfig& c, const std::string& v) { c.env.reward_noise = parse_double(v); }},
      {"protocol.n_clients", [](ExperimentConfig& c, const std::string& v) { c.protocol.n_clients = to_int(parse_int(v)); }},
      {"protocol.n_rounds", [](ExperimentConfig& c, const std::string& v) { c.protocol.n_rounds = to_int(parse_int(v)); }},
      {"protocol.local_steps", [](ExperimentConfig& c, const std::string& v) { c.protocol.local_steps = to_int(parse_int(v)); }},
      {"protocol.actor_lr", [](ExperimentConfig& c, const std::string& v) { c.protocol.actor_lr = parse_double(v); }},
      {"protocol.batch_size", [](ExperimentConfig& c, const std::string& v) { c.protocol.batch_size = to_int(parse_int(v)); }},
      {"protocol.critic_iters", [](ExperimentConfig& c, const std::string& v) { c.protocol.critic.n_iters = to_int(parse_int(v)); }},
      {"protocol.critic_batch", [](ExperimentConfig& c, const std::string& v) { c.protocol.critic.batch_size = to_int(parse_int(v)); }},
      {"protocol.critic_lr", [](ExperimentConfig& c, const std::string& v) { c.protocol.critic.stepsize = parse_double(v); }},
      {"protocol.critic_every", [](ExperimentConfig& c, const std::string& v) { c.protocol.critic_every = to_int(parse_int(v)); }},
      {"protocol.critic_radius", [](ExperimentConfig& c, const std::string& v) { c.protocol.critic_radius = parse_double(v); }},
      {"protocol.beta", [](ExperimentConfig& c, const std::string& v) { c.protocol.mgda.beta = parse_double(v); }},
      {"protocol.preference",
       [](ExperimentConfig& c, const std::string& v) {
         if (v.empty() || v == "none") c.protocol.mgda.preference.reset();
         else c.protocol.mgda.preference = parse_vector(v);
       }},
      {"protocol.normalize_gram", [](ExperimentConfig& c, const std::string& v) { c.protocol.mgda.normalize_gram = parse_bool(v); }},
      {"protocol.mgda_tol", [](ExperimentConfig& c, const std::string& v) { c.protocol.mgda.tol = parse_double(v); }},
      {"protocol.mgda_max_iters", [](ExperimentConfig& c, const std::string& v) { c.protocol.mgda.max_iters = to_int(parse_int(v)); }},
      {"protocol.eta",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "reciprocal") c.protocol.eta_schedule = EtaSchedule::reciprocal;
         else if (v == "constant") c.protocol.eta_schedule = EtaSchedule::constant;
         else throw ConfigError("protocol.eta must be reciprocal or constant");
       }},
      {"protocol.eta_constant", [](ExperimentConfig& c, const std::string& v) { c.protocol.eta_constant = parse_double(v); }},
      {"protocol.mode", [](ExperimentConfig& c, const std::string& v) { c.protocol.mode = parse_mode(v); }},
      {"protocol.seed", [](ExperimentConfig& c, const std::string& v) { c.protocol.seed = parse_u64(v); }},
      {"protocol.parallel", [](ExperimentConfig& c, const std::string& v) { c.protocol.parallel = parse_bool(v); }},
      {"protocol.per_step_stationarity",
       [](ExperimentConfig& c, const std::string& v) { c.protocol.per_step_stationarity = parse_bool(v); }},
      {"protocol.heterogeneity", [](ExperimentConfig& c, const std::string& v) { c.protocol.heterogeneity = parse_double(v); }},
      {"output.dir", [](ExperimentConfig& c, const std::string& v) { c.output.directory = v; }},
      {"output.csv", [](ExperimentConfig& c, const std::string& v) { c.output.csv = v; }},
      {"output.log_every", [](ExperimentConfig& c, const std::string& v) { c.output.log_every = to_int(parse_int(v)); }},
      {"sweep.preferences", [](ExperimentConfig& c, const std::string& v) { c.sweep_preferences = parse_vector_list(v); }},
  };
  return setters;
}

}  // namespace detail

/// Parses `key = value` lines with `#` comments and dotted section keys.
/// Unknown keys, malformed lines and invalid values throw ConfigError
/// carrying the line number; the assembled config is validated.
inline ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig config = default_config();
  const auto& setters = detail::config_setters();
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(where + "unknown key '" + key + "'");
    try {
      it->second(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(is);
}

}  // namespace firm

#endif  // FIRM_CONFIG_HPP_
