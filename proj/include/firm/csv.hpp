#ifndef FIRM_CSV_HPP_
#define FIRM_CSV_HPP_

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "firm/federation.hpp"

namespace firm {

/// %.17g: enough digits for an exact double round trip.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Per-(step, client) rows. Steps not divisible by `log_every` are skipped.
inline void write_csv(std::ostream& os, const RunLog& log, int log_every = 1) {
  const int m = log.n_objectives;
  os << "round,step,client,mode";
  for (int j = 1; j <= m; ++j) os << ",J_" << j;
  for (int j = 1; j <= m; ++j) os << ",lambda_" << j;
  os << ",stationarity,lambda_disagreement,param_drift,solver_converged\n";
  for (const auto& round : log.rounds) {
    for (const auto& e : round.entries) {
      if (e.step % log_every != 0) continue;
      os << e.round << ',' << e.step << ',' << e.client << ',' << to_string(log.mode);
      for (int j = 0; j < m; ++j) os << ',' << format_double(e.returns(j));
      for (int j = 0; j < m; ++j) os << ',' << format_double(e.lambda(j));
      os << ',' << format_double(e.stationarity) << ',' << format_double(e.lambda_disagreement) << ','
         << format_double(e.param_drift) << ',' << (e.solver_converged ? 1 : 0) << '\n';
    }
  }
}

/// One row per round with metrics at the aggregated parameters.
inline void write_rounds_csv(std::ostream& os, const RunLog& log) {
  const int m = log.n_objectives;
  os << "round,stationarity,weighted_stationarity";
  for (int j = 1; j <= m; ++j) os << ",J_" << j;
  for (int j = 1; j <= m; ++j) os << ",lambda_" << j;
  os << ",lambda_disagreement_l1,lambda_disagreement_l2,param_drift\n";
  for (const auto& round : log.rounds) {
    double l1 = 0.0;
    double l2 = 0.0;
    double drift = 0.0;
    for (const auto& e : round.entries) {
      l1 += e.lambda_disagreement;
      l2 += e.lambda_disagreement_l2;
      drift += e.param_drift;
    }
    const double n = round.entries.empty() ? 1.0 : static_cast<double>(round.entries.size());
    os << round.round << ',' << format_double(round.stationarity) << ',' << format_double(round.weighted_stationarity);
    for (int j = 0; j < m; ++j) os << ',' << format_double(round.global_returns(j));
    for (int j = 0; j < m; ++j) os << ',' << format_double(round.mean_lambda(j));
    os << ',' << format_double(l1 / n) << ',' << format_double(l2 / n) << ',' << format_double(drift / n) << '\n';
  }
}

inline std::string csv_string(const RunLog& log, int log_every = 1) {
  std::ostringstream os;
  write_csv(os, log, log_every);
  return os.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << contents;
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

inline void emit_csv(const RunLog& log, const std::string& path, int log_every = 1) {
  write_file(path, csv_string(log, log_every));
}

inline void emit_rounds_csv(const RunLog& log, const std::string& path) {
  std::ostringstream os;
  write_rounds_csv(os, log);
  write_file(path, os.str());
}

}  // namespace firm

#endif  // FIRM_CSV_HPP_
