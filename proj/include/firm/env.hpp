#ifndef FIRM_ENV_HPP_
#define FIRM_ENV_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "firm/errors.hpp"
#include "firm/rng.hpp"

namespace firm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Tabular multi-objective MDP shared by every client.
///
/// `transition` stores P[s][a][s'] as a (|S|*|A|) x |S| matrix whose row
/// s*|A|+a is the next-state distribution of the pair (s, a). `rewards[j]`
/// is the |S| x |A| table of objective j.
struct MomdpSpec {
  int n_states = 0;
  int n_actions = 0;
  int n_objectives = 0;
  MatrixXd transition;
  std::vector<MatrixXd> rewards;
  double r_max = 1.0;
  double gamma = 0.9;
  VectorXd initial_dist;

  int pair_index(int s, int a) const { return s * n_actions + a; }
  double p(int s, int a, int next) const { return transition(pair_index(s, a), next); }
  double reward(int j, int s, int a) const { return rewards[static_cast<std::size_t>(j)](s, a); }
  /// Flattened policy-parameter dimension |S|*|A|.
  int param_dim() const { return n_states * n_actions; }

  bool operator==(const MomdpSpec& other) const {
    if (n_states != other.n_states || n_actions != other.n_actions ||
        n_objectives != other.n_objectives || r_max != other.r_max || gamma != other.gamma ||
        transition != other.transition || initial_dist != other.initial_dist ||
        rewards.size() != other.rewards.size()) {
      return false;
    }
    for (std::size_t j = 0; j < rewards.size(); ++j) {
      if (rewards[j] != other.rewards[j]) return false;
    }
    return true;
  }
};

/// One (s, a, s', r) transition with the full reward vector.
struct TransitionSample {
  int state = 0;
  int action = 0;
  int next_state = 0;
  VectorXd reward_vec;
};

/// State features phi(s), stored one state per row.
struct FeatureMap {
  int dim = 0;
  MatrixXd table;

  auto phi(int s) const { return table.row(s).transpose(); }
};

/// State-to-state matrix of the chain induced by a row-stochastic
/// |S| x |A| policy table.
inline MatrixXd induced_transition(const MomdpSpec& m, const MatrixXd& policy) {
  MatrixXd out = MatrixXd::Zero(m.n_states, m.n_states);
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      out.row(s) += policy(s, a) * m.transition.row(m.pair_index(s, a));
    }
  }
  return out;
}

/// True when some power of the uniform-policy chain is entrywise positive
/// (irreducible and aperiodic). Powers up to Wielandt's bound (n-1)^2+1 are
/// checked, which is sufficient for any primitive matrix.
inline bool uniform_chain_is_primitive(const MomdpSpec& m) {
  const MatrixXd uniform = MatrixXd::Constant(m.n_states, m.n_actions, 1.0 / m.n_actions);
  const MatrixXd chain = induced_transition(m, uniform);
  // Work on the support pattern only so round-off cannot hide a zero.
  const MatrixXd pattern = (chain.array() > 0.0).cast<double>().matrix();
  MatrixXd power = pattern;
  const int bound = (m.n_states - 1) * (m.n_states - 1) + 1;
  for (int k = 1; k <= bound; ++k) {
    if ((power.array() > 0.0).all()) return true;
    power = ((power * pattern).array() > 0.0).cast<double>().matrix();
  }
  return false;
}

/// Throws ConfigError naming the first violated invariant.
inline void validate(const MomdpSpec& m) {
  if (m.n_states < 1 || m.n_actions < 1 || m.n_objectives < 1) {
    throw ConfigError("momdp dimensions must all be >= 1");
  }
  if (!(m.gamma > 0.0 && m.gamma < 1.0)) throw ConfigError("gamma must lie strictly inside (0, 1)");
  if (!(m.r_max > 0.0)) throw ConfigError("r_max must be > 0");
  if (m.transition.rows() != m.param_dim() || m.transition.cols() != m.n_states) {
    throw ConfigError("transition tensor has the wrong shape");
  }
  if (static_cast<int>(m.rewards.size()) != m.n_objectives) {
    throw ConfigError("reward table count differs from n_objectives");
  }
  if (m.initial_dist.size() != m.n_states) throw ConfigError("initial distribution has the wrong length");
  for (int row = 0; row < m.transition.rows(); ++row) {
    if ((m.transition.row(row).array() < 0.0).any()) throw ConfigError("negative transition probability");
    if (std::abs(m.transition.row(row).sum() - 1.0) > 1e-12) {
      throw ConfigError("transition row " + std::to_string(row) + " does not sum to 1");
    }
  }
  for (const auto& r : m.rewards) {
    if (r.rows() != m.n_states || r.cols() != m.n_actions) throw ConfigError("reward table has the wrong shape");
    if ((r.array() < 0.0).any() || (r.array() > m.r_max).any()) {
      throw ConfigError("rewards must lie in [0, r_max]");
    }
  }
  if ((m.initial_dist.array() < 0.0).any() || std::abs(m.initial_dist.sum() - 1.0) > 1e-12) {
    throw ConfigError("initial distribution must be a probability vector");
  }
  if (!uniform_chain_is_primitive(m)) {
    throw ConfigError("uniform-policy chain is not irreducible and aperiodic");
  }
}

namespace detail {

inline void check_build_args(int n_states, int n_actions, int n_objectives, double gamma, double r_max) {
  if (n_states < 1 || n_actions < 1 || n_objectives < 1) {
    throw ConfigError("n_states, n_actions and n_objectives must all be >= 1");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie strictly inside (0, 1)");
  if (!(r_max > 0.0)) throw ConfigError("r_max must be > 0");
}

inline MatrixXd random_transitions(int n_states, int n_actions, Rng& rng) {
  MatrixXd p(n_states * n_actions, n_states);
  for (int row = 0; row < p.rows(); ++row) {
    for (int next = 0; next < n_states; ++next) p(row, next) = rng.uniform(0.05, 1.0);
    p.row(row) /= p.row(row).sum();
  }
  return p;
}

}  // namespace detail

/// Random MOMDP with strictly positive transitions (hence a primitive chain
/// under every policy), rewards uniform in [0, r_max] and a uniform initial
/// distribution. Deterministic in `seed`.
inline MomdpSpec build_random_momdp(int n_states, int n_actions, int n_objectives, double gamma,
                                    double r_max, std::uint64_t seed) {
  detail::check_build_args(n_states, n_actions, n_objectives, gamma, r_max);
  Rng rng = Rng::stream(seed, 0x656e76);
  MomdpSpec m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.n_objectives = n_objectives;
  m.gamma = gamma;
  m.r_max = r_max;
  m.transition = detail::random_transitions(n_states, n_actions, rng);
  m.rewards.reserve(static_cast<std::size_t>(n_objectives));
  for (int j = 0; j < n_objectives; ++j) {
    MatrixXd r(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
      for (int a = 0; a < n_actions; ++a) r(s, a) = rng.uniform(0.0, r_max);
    }
    m.rewards.push_back(std::move(r));
  }
  m.initial_dist = VectorXd::Constant(n_states, 1.0 / n_states);
  return m;
}

/// Two-objective MOMDP whose rewards are in direct conflict:
/// r2(s,a) = r_max - r1(s,a). Any gain on one objective costs the other.
inline MomdpSpec build_conflicting_momdp(int n_states, int n_actions, double gamma, double r_max,
                                         std::uint64_t seed) {
  MomdpSpec m = build_random_momdp(n_states, n_actions, 1, gamma, r_max, seed);
  m.n_objectives = 2;
  m.rewards.push_back((MatrixXd::Constant(n_states, n_actions, r_max) - m.rewards[0]).cwiseMax(0.0));
  return m;
}

/// MOMDP whose M reward tables share a common base table: r^j = clip(base +
/// noise * U(-1, 1), 0, r_max). Small `noise` gives nearly collinear
/// objective gradients and an ill-conditioned Gram matrix.
inline MomdpSpec build_correlated_momdp(int n_states, int n_actions, int n_objectives, double gamma, double r_max,
                                        double noise, std::uint64_t seed) {
  if (!(noise >= 0.0)) throw ConfigError("reward noise must be >= 0");
  MomdpSpec m = build_random_momdp(n_states, n_actions, 1, gamma, r_max, seed);
  Rng rng = Rng::stream(seed, 0x636f7272);
  const MatrixXd base = m.rewards.front();
  m.n_objectives = n_objectives;
  m.rewards.clear();
  for (int j = 0; j < n_objectives; ++j) {
    MatrixXd r(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
      for (int a = 0; a < n_actions; ++a) r(s, a) = std::clamp(base(s, a) + noise * rng.uniform(-1.0, 1.0), 0.0, r_max);
    }
    m.rewards.push_back(std::move(r));
  }
  return m;
}

/// Samples s' ~ P[state][action][.] by inverse CDF. Rewards are deterministic.
inline TransitionSample step(const MomdpSpec& m, int state, int action, Rng& rng) {
  TransitionSample out;
  out.state = state;
  out.action = action;
  const auto row = m.transition.row(m.pair_index(state, action));
  double u = rng.uniform();
  int next = m.n_states - 1;
  for (int k = 0; k < m.n_states; ++k) {
    u -= row(k);
    if (u < 0.0) {
      next = k;
      break;
    }
  }
  // Round-off can leave u >= 0 after the last column; land on the last state
  // with positive mass.
  if (u >= 0.0) {
    while (next > 0 && row(next) <= 0.0) --next;
  }
  out.next_state = next;
  out.reward_vec.resize(m.n_objectives);
  for (int j = 0; j < m.n_objectives; ++j) out.reward_vec(j) = m.reward(j, state, action);
  return out;
}

/// One-hot state features: phi(s) = e_s, d = |S|.
inline FeatureMap one_hot_features(const MomdpSpec& m) {
  return FeatureMap{m.n_states, MatrixXd::Identity(m.n_states, m.n_states)};
}

// ---------------------------------------------------------------------------
// Text serialization. `key = value...` lines, `#` comments; floats are
// printed with 17 significant digits so a round trip is exact.

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_momdp(std::ostream& os, const MomdpSpec& m) {
  os << "# momdp v1\n";
  os << "n_states = " << m.n_states << "\n";
  os << "n_actions = " << m.n_actions << "\n";
  os << "n_objectives = " << m.n_objectives << "\n";
  os << "gamma = " << detail::fmt17(m.gamma) << "\n";
  os << "r_max = " << detail::fmt17(m.r_max) << "\n";
  os << "initial =";
  for (int s = 0; s < m.n_states; ++s) os << ' ' << detail::fmt17(m.initial_dist(s));
  os << "\n";
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      os << "transition." << s << '.' << a << " =";
      for (int k = 0; k < m.n_states; ++k) os << ' ' << detail::fmt17(m.p(s, a, k));
      os << "\n";
    }
  }
  for (int j = 0; j < m.n_objectives; ++j) {
    for (int s = 0; s < m.n_states; ++s) {
      os << "reward." << j << '.' << s << " =";
      for (int a = 0; a < m.n_actions; ++a) os << ' ' << detail::fmt17(m.reward(j, s, a));
      os << "\n";
    }
  }
}

/// Parses the format produced by write_momdp and validates the result.
inline MomdpSpec read_momdp(std::istream& is) {
  MomdpSpec m;
  std::vector<std::pair<std::string, std::vector<double>>> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        throw ConfigError("momdp line " + std::to_string(line_no) + ": expected 'key = values'");
      }
      continue;
    }
    std::istringstream key_stream(line.substr(0, eq));
    std::string key;
    key_stream >> key;
    std::istringstream value_stream(line.substr(eq + 1));
    std::vector<double> values;
    std::string token;
    while (value_stream >> token) {
      try {
        values.push_back(std::stod(token));
      } catch (const std::exception&) {
        throw ConfigError("momdp line " + std::to_string(line_no) + ": bad number '" + token + "'");
      }
    }
    entries.emplace_back(key, std::move(values));
  }
  auto scalar = [&](const std::string& key) -> double {
    for (const auto& [k, v] : entries) {
      if (k == key && v.size() == 1) return v[0];
    }
    throw ConfigError("momdp file is missing '" + key + "'");
  };
  m.n_states = static_cast<int>(scalar("n_states"));
  m.n_actions = static_cast<int>(scalar("n_actions"));
  m.n_objectives = static_cast<int>(scalar("n_objectives"));
  m.gamma = scalar("gamma");
  m.r_max = scalar("r_max");
  detail::check_build_args(m.n_states, m.n_actions, m.n_objectives, m.gamma, m.r_max);
  m.transition = MatrixXd::Constant(m.param_dim(), m.n_states, -1.0);
  m.rewards.assign(static_cast<std::size_t>(m.n_objectives), MatrixXd::Constant(m.n_states, m.n_actions, -1.0));
  m.initial_dist = VectorXd::Constant(m.n_states, -1.0);
  for (const auto& [key, values] : entries) {
    int i = 0;
    int k = 0;
    if (key == "initial") {
      if (static_cast<int>(values.size()) != m.n_states) throw ConfigError("momdp 'initial' has the wrong length");
      m.initial_dist = Eigen::Map<const VectorXd>(values.data(), m.n_states);
    } else if (std::sscanf(key.c_str(), "transition.%d.%d", &i, &k) == 2) {
      if (i < 0 || i >= m.n_states || k < 0 || k >= m.n_actions ||
          static_cast<int>(values.size()) != m.n_states) {
        throw ConfigError("momdp entry '" + key + "' is out of range");
      }
      m.transition.row(m.pair_index(i, k)) = Eigen::Map<const VectorXd>(values.data(), m.n_states).transpose();
    } else if (std::sscanf(key.c_str(), "reward.%d.%d", &i, &k) == 2) {
      if (i < 0 || i >= m.n_objectives || k < 0 || k >= m.n_states ||
          static_cast<int>(values.size()) != m.n_actions) {
        throw ConfigError("momdp entry '" + key + "' is out of range");
      }
      m.rewards[static_cast<std::size_t>(i)].row(k) =
          Eigen::Map<const VectorXd>(values.data(), m.n_actions).transpose();
    } else if (key != "n_states" && key != "n_actions" && key != "n_objectives" && key != "gamma" &&
               key != "r_max") {
      throw ConfigError("unknown momdp key '" + key + "'");
    }
  }
  validate(m);
  return m;
}

inline void save_momdp(const std::string& path, const MomdpSpec& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_momdp(os, m);
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

inline MomdpSpec load_momdp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open momdp file '" + path + "'");
  return read_momdp(is);
}

}  // namespace firm

#endif  // FIRM_ENV_HPP_
