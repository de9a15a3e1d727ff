// Command-line front end for the federated distillation simulator.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime/numeric error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedkd/fedkd.hpp"
#include "fedkd/json_io.hpp"

namespace fs = std::filesystem;

namespace {

// --out flag beats FEDKD_OUT beats ./runs; the run directory is named after
// the config file.
fs::path resolve_out_dir(const std::string& out_flag, const std::string& config_path) {
  fs::path base;
  if (!out_flag.empty()) {
    base = out_flag;
  } else if (const char* env = std::getenv("FEDKD_OUT"); env && *env) {
    base = env;
  } else {
    base = "runs";
  }
  return base / fs::path(config_path).stem();
}

int run_command(const std::string& config_path, std::int64_t seed_override, bool has_seed,
                const std::string& out_flag, int parallel, bool quiet) {
  fedkd::ExperimentConfig config = fedkd::parse_config(config_path);
  if (has_seed) config.master_seed = static_cast<std::uint64_t>(seed_override);

  const fs::path out_dir = resolve_out_dir(out_flag, config_path);
  fs::create_directories(out_dir);

  std::ofstream round_log(out_dir / "rounds.jsonl", std::ios::trunc);
  if (!round_log)
    throw fedkd::DataError("cannot write '" + (out_dir / "rounds.jsonl").string() + "'");

  const auto on_round = [&](const fedkd::RoundRecord& record) {
    round_log << fedkd::jsonio::dump(fedkd::round_record_json(record, true)) << '\n';
    round_log.flush();  // completed rounds survive a crash
    if (!quiet)
      std::cout << "round " << record.round << "/" << config.rounds << "  up "
                << fedkd::wire::to_mb(record.bytes_up) << " MB  down "
                << fedkd::wire::to_mb(record.bytes_down) << " MB\n";
  };

  const fedkd::ExperimentResult result = fedkd::run_experiment(config, parallel, on_round);
  fedkd::write_result_files(result, out_dir);

  if (!quiet) {
    std::cout << "method " << fedkd::to_string(config.method) << ", " << config.num_clients
              << " clients, " << config.rounds << " rounds\n";
    if (!result.report.clients.empty())
      std::cout << "fleet personalization " << result.report.mean_personalization
                << "%, generalization " << result.report.mean_generalization << "%, bam "
                << result.report.mean_bam << "%\n";
    std::cout << "total communication " << result.ledger.total_mb() << " MB\n";
    std::cout << "results in " << out_dir.string() << "\n";
  }
  return 0;
}

int compare_command(const std::vector<std::string>& paths, const std::string& csv_out) {
  std::vector<fs::path> summaries;
  for (const auto& p : paths) {
    fs::path path(p);
    if (fs::is_directory(path)) path /= "summary.json";
    summaries.push_back(path);
  }
  const auto rows = fedkd::load_comparison(summaries);
  std::cout << fedkd::comparison_text(rows);
  if (!csv_out.empty()) {
    fedkd::jsonio::write_file_atomic(csv_out, fedkd::comparison_csv(rows));
    std::cout << "csv written to " << csv_out << "\n";
  }
  return 0;
}

int sweep_command(const std::string& config_path, const std::string& param,
                  const std::string& values_csv, const std::string& out_dir) {
  std::vector<std::string> values;
  std::stringstream ss(values_csv);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(item);
  if (values.empty()) throw fedkd::ConfigError("sweep: --values is empty");

  const auto written = fedkd::write_sweep_configs(config_path, param, values, out_dir);
  for (const auto& p : written) std::cout << p.string() << "\n";
  return 0;
}

int plot_data_command(const std::string& run_dir, const std::string& out_file) {
  const std::string csv = fedkd::plot_data_csv(run_dir);
  if (out_file.empty()) {
    std::cout << csv;
  } else {
    fedkd::jsonio::write_file_atomic(out_file, csv);
    std::cout << "plot data written to " << out_file << "\n";
  }
  return 0;
}

int validate_command(const std::string& config_path) {
  const fedkd::ExperimentConfig config = fedkd::parse_config(config_path);
  std::cout << "OK: " << config_path << " (" << fedkd::to_string(config.method) << ", "
            << config.num_clients << " clients, " << config.rounds << " rounds)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedkd - federated distillation simulator"};
  app.require_subcommand(1);

  std::string config_path, out_flag, csv_out, param, values_csv, run_dir, out_file;
  std::int64_t seed_override = 0;
  int parallel = 1;
  bool quiet = false;
  std::vector<std::string> compare_paths;

  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  auto* seed_opt = run->add_option("--seed", seed_override, "Override the config's master_seed");
  run->add_option("--out", out_flag, "Output directory (default $FEDKD_OUT or ./runs)");
  run->add_option("--parallel", parallel, "Client-level worker threads")
      ->check(CLI::PositiveNumber);
  run->add_flag("--quiet", quiet, "Suppress per-round progress");

  auto* compare = app.add_subcommand("compare", "Tabulate persisted runs side by side");
  compare->add_option("summaries", compare_paths, "summary.json files or run directories")
      ->required()
      ->expected(-1);
  compare->add_option("--csv", csv_out, "Also write the table as CSV");

  auto* sweep = app.add_subcommand("sweep", "Generate config variants over one parameter");
  sweep->add_option("--config", config_path, "Base config (JSON)")->required();
  sweep->add_option("--param", param, "Dot-separated field, e.g. dirichlet_alpha")->required();
  sweep->add_option("--values", values_csv, "Comma-separated values")->required();
  sweep->add_option("--out", out_flag, "Directory for the generated configs")->required();

  auto* plot = app.add_subcommand("plot-data", "Emit tidy CSV series from a run directory");
  plot->add_option("run_dir", run_dir, "Directory holding rounds.jsonl and summary.json")
      ->required();
  plot->add_option("--out", out_file, "Write to a file instead of stdout");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config file");
  validate->add_option("--config", config_path, "Experiment config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return run_command(config_path, seed_override, seed_opt->count() > 0, out_flag, parallel,
                         quiet);
    if (compare->parsed()) return compare_command(compare_paths, csv_out);
    if (sweep->parsed()) return sweep_command(config_path, param, values_csv, out_flag);
    if (plot->parsed()) return plot_data_command(run_dir, out_file);
    if (validate->parsed()) return validate_command(config_path);
  } catch (const fedkd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
