// Two clients, two correlated objectives: prints how the per-client MGDA
// weights drift apart with and without the regularizer.

#include <cstdio>

#include "firm/env.hpp"
#include "firm/federation.hpp"
#include "firm/oracle.hpp"

int main() {
  const firm::MomdpSpec m = firm::build_correlated_momdp(5, 3, 2, 0.9, 1.0, 0.01, 42);
  for (const double beta : {0.0, 0.05}) {
    firm::ProtocolConfig config;
    config.n_clients = 2;
    config.n_rounds = 30;
    config.local_steps = 4;
    config.mgda.beta = beta;
    const firm::RunLog log = firm::run_experiment(config, m);
    double disagreement = 0.0;
    int n = 0;
    for (const auto& round : log.rounds) {
      for (const auto& e : round.entries) {
        disagreement += e.lambda_disagreement;
        ++n;
      }
    }
    const Eigen::VectorXd j = firm::oracle::exact_return(m, log.final_policy);
    std::printf("beta=%-5g mean lambda disagreement=%.5f  final J=(%.4f, %.4f)  lambda=(%.3f, %.3f)\n", beta,
                disagreement / n, j(0), j(1), log.final_lambda.lambda(0), log.final_lambda.lambda(1));
  }
  return 0;
}
