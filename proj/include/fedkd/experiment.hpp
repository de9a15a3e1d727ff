#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "fedkd/json_io.hpp"
#include "fedkd/runners.hpp"

namespace fedkd {

namespace fs = std::filesystem;

struct ExperimentSetup {
  LabeledDataset dataset;
  std::vector<ClientPartition> partitions;
  PublicDataset public_data;  // empty unless method is fedadas
};

// Dataset -> non-IID partitions -> optional covariate shift -> public pool.
inline ExperimentSetup prepare_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentSetup setup;
  if (config.dataset.kind == DatasetConfig::Kind::kSynthetic) {
    setup.dataset = generate_synthetic(config.dataset.num_classes, config.dataset.feature_dim,
                                       config.dataset.samples_per_class,
                                       derive_seed(config.master_seed, "dataset"),
                                       config.dataset.class_separation);
  } else {
    setup.dataset = load_csv(config.dataset.path, config.dataset.has_header);
  }

  setup.partitions = partition_non_iid(setup.dataset, config.num_clients, config.dirichlet_alpha,
                                       config.test_fraction,
                                       derive_seed(config.master_seed, "partition-seed"));

  if (config.covariate_shift.kind != ShiftKind::kNone) {
    for (int i = config.covariate_shift.begin_client; i < config.covariate_shift.end_client; ++i)
      setup.partitions[static_cast<std::size_t>(i)] = apply_covariate_shift(
          setup.partitions[static_cast<std::size_t>(i)], config.covariate_shift.kind,
          config.covariate_shift.magnitude,
          derive_seed(config.master_seed, "shift", static_cast<std::uint64_t>(i)));
  }

  if (config.method == Method::kFedAdas)
    setup.public_data =
        build_public_dataset(setup.partitions, config.public_contribution_fraction,
                             derive_seed(config.master_seed, "public-pool"));
  return setup;
}

inline ExperimentResult run_experiment(const ExperimentConfig& config, int parallel = 1,
                                       const RoundCallback& on_round = {}) {
  const ExperimentSetup setup = prepare_experiment(config);
  switch (config.method) {
    case Method::kFedAdas:
      return run_fedadas(config, setup.partitions, setup.public_data, parallel, on_round);
    case Method::kFedAvg:
      return run_fedavg(config, setup.partitions, parallel, on_round);
    case Method::kLocalOnly:
      return run_local_only(config, setup.partitions, parallel, on_round);
  }
  throw ConfigError("unknown method");
}

namespace detail {

inline std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setfill('0') << std::setw(16) << v;
  return out.str();
}

}  // namespace detail

// One rounds.jsonl line. Wall-clock time goes only here, never into the
// summary, which must be byte-identical across reruns.
inline ordered_json round_record_json(const RoundRecord& r, bool include_wall_clock) {
  ordered_json j;
  j["round"] = r.round;
  j["local_losses"] = r.local_losses;
  j["distill_losses"] = r.distill_losses;
  j["aggregate_digest"] = detail::hex64(r.aggregate_digest);
  j["bytes_up"] = r.bytes_up;
  j["bytes_down"] = r.bytes_down;
  if (include_wall_clock) j["wall_ms"] = r.wall_ms;
  return j;
}

inline ordered_json eval_report_json(const EvalReport& report) {
  ordered_json j;
  j["clients"] = ordered_json::array();
  for (const auto& c : report.clients)
    j["clients"].push_back({{"client_id", c.client_id},
                            {"capacity_tier", c.capacity_tier},
                            {"personalization", c.personalization},
                            {"generalization", c.generalization},
                            {"bam", c.bam}});
  j["fleet"] = {{"personalization", report.mean_personalization},
                {"generalization", report.mean_generalization},
                {"bam", report.mean_bam}};
  return j;
}

inline ordered_json summary_json(const ExperimentResult& result) {
  ordered_json j;
  j["config"] = config_to_json(result.config);
  j["rounds"] = ordered_json::array();
  for (const auto& r : result.rounds)
    j["rounds"].push_back(round_record_json(r, /*include_wall_clock=*/false));
  j["evaluation"] = eval_report_json(result.report);
  j["communication"] = {
      {"total_bytes_up", result.ledger.total_bytes({Direction::kUp, {}, {}, {}})},
      {"total_bytes_down", result.ledger.total_bytes({Direction::kDown, {}, {}, {}})},
      {"total_mb", result.ledger.total_mb()},
      {"uplink_mb_per_client_round",
       result.config.rounds > 0 && result.config.num_clients > 0
           ? result.ledger.total_mb({Direction::kUp, {}, {}, {}}) /
                 (result.config.rounds * result.config.num_clients)
           : 0.0}};
  return j;
}

// Evaluation report as CSV: one row per client plus a fleet mean row.
inline std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "client_id,capacity_tier,personalization,generalization,bam\n";
  const auto fmt = [](double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
  };
  for (const auto& c : report.clients)
    out << c.client_id << ',' << c.capacity_tier << ',' << fmt(c.personalization) << ','
        << fmt(c.generalization) << ',' << fmt(c.bam) << '\n';
  out << "fleet,," << fmt(report.mean_personalization) << ',' << fmt(report.mean_generalization)
      << ',' << fmt(report.mean_bam) << '\n';
  return out.str();
}

// Persists summary.json (atomic), report.csv and timing.json under dir.
// rounds.jsonl is streamed by the caller during the run.
inline void write_result_files(const ExperimentResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  jsonio::write_file_atomic(dir / "summary.json", jsonio::dump(summary_json(result), 2) + "\n");
  jsonio::write_file_atomic(dir / "report.csv", report_csv(result.report));

  ordered_json timing;
  timing["total_wall_ms"] = result.total_wall_ms;
  timing["rounds"] = ordered_json::array();
  for (const auto& r : result.rounds) timing["rounds"].push_back(r.wall_ms);
  jsonio::write_file_atomic(dir / "timing.json", jsonio::dump(timing, 2) + "\n");
}

// ---- comparison across persisted runs -------------------------------------

struct ComparisonRow {
  std::string label;
  std::string method;
  double personalization = 0.0;
  double generalization = 0.0;
  double bam = 0.0;
  double total_mb = 0.0;
};

inline ComparisonRow comparison_row_from_summary(const fs::path& summary_path) {
  std::ifstream in(summary_path);
  if (!in) throw DataError("cannot open summary '" + summary_path.string() + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("summary '" + summary_path.string() + "' is not valid JSON: " + e.what());
  }
  ComparisonRow row;
  row.label = summary_path.parent_path().filename().string();
  if (row.label.empty()) row.label = summary_path.string();
  try {
    row.method = j.at("config").at("method").get<std::string>();
    row.personalization = j.at("evaluation").at("fleet").at("personalization").get<double>();
    row.generalization = j.at("evaluation").at("fleet").at("generalization").get<double>();
    row.bam = j.at("evaluation").at("fleet").at("bam").get<double>();
    row.total_mb = j.at("communication").at("total_mb").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("summary '" + summary_path.string() + "' is missing fields: " + e.what());
  }
  return row;
}

inline std::vector<ComparisonRow> load_comparison(const std::vector<fs::path>& summaries) {
  std::vector<ComparisonRow> rows;
  rows.reserve(summaries.size());
  for (const auto& p : summaries) rows.push_back(comparison_row_from_summary(p));
  return rows;
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "label,method,personalization,generalization,bam,total_comm_mb\n";
  out << std::setprecision(17);
  for (const auto& r : rows)
    out << r.label << ',' << r.method << ',' << r.personalization << ',' << r.generalization
        << ',' << r.bam << ',' << r.total_mb << '\n';
  return out.str();
}

inline std::string comparison_text(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "run" << std::setw(12) << "method" << std::right
      << std::setw(10) << "pers" << std::setw(10) << "gen" << std::setw(10) << "bam"
      << std::setw(14) << "comm (MB)" << '\n';
  out << std::string(84, '-') << '\n';
  out << std::fixed << std::setprecision(2);
  for (const auto& r : rows)
    out << std::left << std::setw(28) << r.label << std::setw(12) << r.method << std::right
        << std::setw(10) << r.personalization << std::setw(10) << r.generalization
        << std::setw(10) << r.bam << std::setw(14) << r.total_mb << '\n';
  return out.str();
}

// ---- tidy long-format export for external plotting -------------------------

// Emits (round, client, metric, value) rows from a persisted run directory:
// per-round mean losses and byte counts, then final per-client evaluation.
inline std::string plot_data_csv(const fs::path& run_dir) {
  std::ostringstream out;
  out << "round,client,metric,value\n";
  out << std::setprecision(17);

  std::ifstream rounds(run_dir / "rounds.jsonl");
  if (!rounds) throw DataError("cannot open '" + (run_dir / "rounds.jsonl").string() + "'");
  std::string line;
  while (std::getline(rounds, line)) {
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      continue;  // tolerate a truncated trailing line
    }
    const int round = j.at("round").get<int>();
    const auto mean_of = [](const ordered_json& arr) {
      double sum = 0.0;
      for (const auto& v : arr) sum += v.get<double>();
      return arr.empty() ? 0.0 : sum / static_cast<double>(arr.size());
    };
    const auto& local = j.at("local_losses");
    for (std::size_t i = 0; i < local.size(); ++i)
      out << round << ',' << i << ",local_loss," << mean_of(local[i]) << '\n';
    const auto& dist = j.at("distill_losses");
    for (std::size_t i = 0; i < dist.size(); ++i)
      out << round << ',' << i << ",distill_loss," << mean_of(dist[i]) << '\n';
    out << round << ",,bytes_up," << j.at("bytes_up").get<std::uint64_t>() << '\n';
    out << round << ",,bytes_down," << j.at("bytes_down").get<std::uint64_t>() << '\n';
  }

  // final per-client evaluation, empty round column
  std::ifstream summary(run_dir / "summary.json");
  if (summary) {
    try {
      const ordered_json j = ordered_json::parse(summary);
      for (const auto& c : j.at("evaluation").at("clients")) {
        const int id = c.at("client_id").get<int>();
        out << ',' << id << ",personalization," << c.at("personalization").get<double>() << '\n';
        out << ',' << id << ",generalization," << c.at("generalization").get<double>() << '\n';
        out << ',' << id << ",bam," << c.at("bam").get<double>() << '\n';
      }
    } catch (const nlohmann::json::exception&) {
      // summary absent or partial: emit round data only
    }
  }
  return out.str();
}

// ---- sweep generation -------------------------------------------------------

// Sets a dot-separated path (e.g. "scheduler.gamma") in a JSON document.
inline void set_json_path(ordered_json& j, const std::string& dotted, const ordered_json& value) {
  ordered_json* cursor = &j;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot - start);
    if (key.empty()) throw ConfigError("sweep: empty segment in parameter path '" + dotted + "'");
    if (dot == std::string::npos) {
      (*cursor)[key] = value;
      return;
    }
    cursor = &(*cursor)[key];
    start = dot + 1;
  }
}

// Writes one validated config per value; returns the paths.
inline std::vector<fs::path> write_sweep_configs(const fs::path& base_config,
                                                 const std::string& param,
                                                 const std::vector<std::string>& values,
                                                 const fs::path& out_dir) {
  std::ifstream in(base_config);
  if (!in) throw ConfigError("cannot open config file '" + base_config.string() + "'");
  ordered_json base;
  try {
    base = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + base_config.string() + "' is not valid JSON: " + e.what());
  }

  fs::create_directories(out_dir);
  const std::string stem = base_config.stem().string();
  std::string param_slug = param;
  for (char& c : param_slug)
    if (c == '.') c = '_';

  std::vector<fs::path> written;
  for (const auto& value_text : values) {
    ordered_json value;
    try {
      value = ordered_json::parse(value_text);
    } catch (const nlohmann::json::parse_error&) {
      value = value_text;  // bare strings are fine
    }
    ordered_json doc = base;
    set_json_path(doc, param, value);
    config_from_json(doc);  // validate before writing

    std::string value_slug = value.is_string() ? value.get<std::string>() : value.dump();
    for (char& c : value_slug)
      if (c == '.' || c == '/' || c == ':') c = 'p';
    const fs::path path = out_dir / (stem + "__" + param_slug + "_" + value_slug + ".json");
    jsonio::write_file_atomic(path, jsonio::dump(doc, 2) + "\n");
    written.push_back(path);
  }
  return written;
}

}  // namespace fedkd
