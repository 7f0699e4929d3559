// Command-line driver: run, sweep, preset, validate.
//
// Exit codes: 0 success, 1 criterion failure (or runtime error),
// 2 configuration error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "firm/config.hpp"
#include "firm/csv.hpp"
#include "firm/env.hpp"
#include "firm/experiments.hpp"
#include "firm/federation.hpp"
#include "firm/oracle.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::string> mode,
            std::optional<std::string> out_dir, bool parallel) {
  firm::ExperimentConfig config = firm::parse_config_file(config_path);
  if (seed) config.protocol.seed = *seed;
  if (mode) config.protocol.mode = firm::parse_mode(*mode);
  if (out_dir) config.output.directory = *out_dir;
  if (parallel) config.protocol.parallel = true;
  config.validate();

  const firm::MomdpSpec m = firm::build_env(config.env);
  std::filesystem::create_directories(config.output.directory);
  firm::save_momdp(join_path(config.output.directory, "momdp.txt"), m);
  const firm::RunLog log = firm::run_experiment(config.protocol, m);
  const std::string csv_path = join_path(config.output.directory, config.output.csv);
  firm::emit_csv(log, csv_path, config.output.log_every);
  firm::emit_rounds_csv(log, join_path(config.output.directory, "rounds.csv"));

  const Eigen::VectorXd j = firm::oracle::exact_return(m, log.final_policy);
  std::cout << "mode=" << firm::to_string(config.protocol.mode) << " rounds=" << log.rounds.size() << " final_J=";
  for (Eigen::Index i = 0; i < j.size(); ++i) std::cout << (i ? "," : "") << firm::format_double(j(i));
  if (!log.rounds.empty()) {
    std::cout << " final_stationarity=" << firm::format_double(log.rounds.back().stationarity);
  }
  std::cout << " gradient_bound_violations=" << log.gradient_bound_violations << "\n";
  std::cout << "wrote " << csv_path << "\n";
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, std::optional<std::string> out_dir) {
  firm::ExperimentConfig config = firm::parse_config_file(config_path);
  if (out_dir) config.output.directory = *out_dir;
  if (config.sweep_preferences.empty()) throw firm::ConfigError("sweep.preferences is empty");
  const auto rows = firm::pareto_sweep(config, config.sweep_preferences);
  std::ostringstream csv;
  firm::write_sweep_csv(csv, rows, config.env.n_objectives);
  std::filesystem::create_directories(config.output.directory);
  const std::string path = join_path(config.output.directory, "sweep.csv");
  firm::write_file(path, csv.str());
  int failures = 0;
  for (const auto& row : rows) {
    if (!row.ok) {
      ++failures;
      std::cerr << "sweep entry failed: " << row.error << "\n";
    }
  }
  std::cout << "wrote " << path << " (" << rows.size() << " entries, " << failures << " failed)\n";
  return failures == 0 ? kExitOk : kExitFailure;
}

int cmd_preset(const std::string& name, const std::string& out_dir, bool parallel) {
  const auto criteria = firm::run_preset(name, firm::ScenarioOutput{out_dir, parallel});
  bool all = true;
  for (const auto& c : criteria) {
    firm::print_criterion(std::cout, c);
    all = all && c.pass;
  }
  return all ? kExitOk : kExitFailure;
}

int cmd_validate(const std::string& config_path) {
  const firm::ExperimentConfig config = firm::parse_config_file(config_path);
  firm::validate(firm::build_env(config.env));
  std::cout << "config ok: C=" << config.protocol.n_clients << " T=" << config.protocol.n_rounds
            << " K=" << config.protocol.local_steps << " B=" << config.protocol.batch_size
            << " beta=" << config.protocol.mgda.beta << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated regularized multi-objective actor-critic simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> out_dir;
  bool parallel = false;

  auto* run = app.add_subcommand("run", "Run one experiment and write per-step CSV metrics");
  run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override protocol.seed");
  run->add_option("--mode", mode, "firm | fedcmoo_a | centralized");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--parallel", parallel, "Run clients on worker threads");

  auto* sweep = app.add_subcommand("sweep", "Preference sweep over sweep.preferences");
  sweep->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_dir, "Output directory");

  std::string preset_name;
  std::string preset_out = "preset_out";
  auto* preset = app.add_subcommand("preset", "Run a named acceptance scenario");
  preset->add_option("name", preset_name, "Preset name")->required();
  preset->add_option("--out", preset_out, "Output directory for CSVs");
  preset->add_flag("--parallel", parallel, "Run clients on worker threads");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config file");
  validate->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, seed, mode, out_dir, parallel);
    if (*sweep) return cmd_sweep(config_path, out_dir);
    if (*preset) return cmd_preset(preset_name, preset_out, parallel);
    if (*validate) return cmd_validate(config_path);
  } catch (const firm::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
