#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedkd/errors.hpp"
#include "fedkd/model.hpp"
#include "fedkd/optimizer.hpp"
#include "fedkd/partition.hpp"

namespace fedkd {

using ordered_json = nlohmann::ordered_json;

enum class Method { kFedAdas, kFedAvg, kLocalOnly };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kFedAdas: return "fedadas";
    case Method::kFedAvg: return "fedavg";
    case Method::kLocalOnly: return "local_only";
  }
  return "fedadas";
}

inline Method method_from_string(const std::string& s) {
  if (s == "fedadas") return Method::kFedAdas;
  if (s == "fedavg") return Method::kFedAvg;
  if (s == "local_only") return Method::kLocalOnly;
  throw ConfigError("method: unknown value '" + s + "' (fedadas, fedavg or local_only)");
}

struct SchedulerConfig {
  SchedulerKind kind = SchedulerKind::kStepDecay;
  int step_size = 10;
  double gamma = 0.7;
  bool operator==(const SchedulerConfig&) const = default;
};

struct CovariateShiftConfig {
  ShiftKind kind = ShiftKind::kNone;
  double magnitude = 0.0;
  int begin_client = 0;  // [begin, end)
  int end_client = 0;
  bool operator==(const CovariateShiftConfig&) const = default;
};

// A capacity tier; input and output widths come from the dataset when the
// tier is materialized into a ModelSpec.
struct ModelTier {
  std::string name;
  std::vector<int> hidden_layers;
  Activation activation = Activation::kRelu;
  bool operator==(const ModelTier&) const = default;
};

inline ModelSpec materialize_spec(const ModelTier& tier, int input_dim, int num_classes) {
  ModelSpec spec;
  spec.input_dim = input_dim;
  spec.hidden_layers = tier.hidden_layers;
  spec.num_classes = num_classes;
  spec.activation = tier.activation;
  spec.capacity_tier = tier.name;
  return spec;
}

struct DatasetConfig {
  enum class Kind { kSynthetic, kCsv };
  Kind kind = Kind::kSynthetic;
  // synthetic
  int num_classes = 2;
  int feature_dim = 2;
  int samples_per_class = 100;
  double class_separation = 5.0;
  // csv
  std::string path;
  bool has_header = false;
  bool operator==(const DatasetConfig&) const = default;
};

struct ExperimentConfig {
  Method method = Method::kFedAdas;
  int num_clients = 2;
  int rounds = 1;
  int e_local = 1;
  int e_distill = 1;
  double temperature = 1.0;
  int batch_size = 32;
  double learning_rate = 0.001;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  SchedulerConfig scheduler;
  double public_contribution_fraction = 0.1;
  int public_batch_size = 0;  // required when method == fedadas
  double dirichlet_alpha = 0.5;
  double test_fraction = 0.2;
  CovariateShiftConfig covariate_shift;
  std::vector<ModelTier> model_tiers;
  std::vector<int> tier_assignment;  // empty -> round robin over tiers
  DatasetConfig dataset;
  std::uint64_t master_seed = 0;

  bool operator==(const ExperimentConfig&) const = default;

  int tier_of(int client_id) const {
    if (tier_assignment.empty())
      return client_id % static_cast<int>(model_tiers.size());
    return tier_assignment[static_cast<std::size_t>(client_id)];
  }

  void validate() const {
    if (model_tiers.empty()) throw ConfigError("model_tiers: at least one tier required");
    if (num_clients < 2) throw ConfigError("num_clients: must be >= 2");
    if (rounds < 0) throw ConfigError("rounds: must be >= 0");
    if (e_local < 0) throw ConfigError("e_local: must be >= 0");
    if (e_distill < 0) throw ConfigError("e_distill: must be >= 0");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (batch_size <= 0) throw ConfigError("batch_size: must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate: must be > 0");
    if (!(dirichlet_alpha > 0.0)) throw ConfigError("dirichlet_alpha: must be > 0");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
      throw ConfigError("test_fraction: must be in (0,1)");
    if (!(public_contribution_fraction > 0.0 && public_contribution_fraction <= 1.0))
      throw ConfigError("public_contribution_fraction: must be in (0,1]");
    if (scheduler.kind == SchedulerKind::kStepDecay) {
      if (scheduler.step_size <= 0) throw ConfigError("scheduler.step_size: must be positive");
      if (!(scheduler.gamma > 0.0 && scheduler.gamma <= 1.0))
        throw ConfigError("scheduler.gamma: must be in (0,1]");
    }
    if (method == Method::kFedAdas && public_batch_size <= 0)
      throw ConfigError("public_batch_size: must be positive for method fedadas");

    if (covariate_shift.kind != ShiftKind::kNone) {
      if (covariate_shift.magnitude < 0.0)
        throw ConfigError("covariate_shift.magnitude: must be >= 0");
      if (covariate_shift.begin_client < 0 || covariate_shift.end_client > num_clients ||
          covariate_shift.begin_client > covariate_shift.end_client)
        throw ConfigError("covariate_shift: client range must satisfy 0 <= begin <= end <= "
                          "num_clients");
    }

    for (std::size_t i = 0; i < model_tiers.size(); ++i)
      for (int h : model_tiers[i].hidden_layers)
        if (h <= 0)
          throw ConfigError("model_tiers[" + std::to_string(i) +
                            "].hidden_layers: widths must be positive");

    if (!tier_assignment.empty()) {
      if (static_cast<int>(tier_assignment.size()) != num_clients)
        throw ConfigError("tier_assignment: needs one entry per client");
      for (int t : tier_assignment)
        if (t < 0 || t >= static_cast<int>(model_tiers.size()))
          throw ConfigError("tier_assignment: tier index out of range");
    }

    if (method == Method::kFedAvg) {
      const ModelTier& first = model_tiers[static_cast<std::size_t>(tier_of(0))];
      for (int i = 1; i < num_clients; ++i)
        if (!(model_tiers[static_cast<std::size_t>(tier_of(i))] == first))
          throw ConfigError("method fedavg: FedAvg requires homogeneous architectures; "
                            "client " + std::to_string(i) + " uses a different tier");
    }

    if (dataset.kind == DatasetConfig::Kind::kSynthetic) {
      if (dataset.num_classes < 2) throw ConfigError("dataset.num_classes: must be >= 2");
      if (dataset.feature_dim < dataset.num_classes)
        throw ConfigError("dataset.feature_dim: must be >= dataset.num_classes");
      if (dataset.samples_per_class <= 0)
        throw ConfigError("dataset.samples_per_class: must be positive");
      if (!(dataset.class_separation > 0.0))
        throw ConfigError("dataset.class_separation: must be > 0");
    } else if (dataset.path.empty()) {
      throw ConfigError("dataset.path: required for csv datasets");
    }
  }
};

namespace detail {

inline void check_keys(const ordered_json& j, const std::string& path,
                       const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError(path.empty() ? "unknown key '" + key + "'"
                                     : path + ": unknown key '" + key + "'");
}

template <class T>
T get_field(const ordered_json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(path + key + ": required field is missing");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + key + ": wrong type");
  }
}

template <class T>
T get_field_or(const ordered_json& j, const std::string& path, const std::string& key,
               T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + key + ": wrong type");
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const ordered_json& j) {
  using detail::check_keys;
  using detail::get_field;
  using detail::get_field_or;

  check_keys(j, "", {"method", "num_clients", "rounds", "e_local", "e_distill", "temperature",
                     "batch_size", "learning_rate", "optimizer", "scheduler",
                     "public_contribution_fraction", "public_batch_size", "dirichlet_alpha",
                     "test_fraction", "covariate_shift", "model_tiers", "tier_assignment",
                     "dataset", "master_seed"});

  ExperimentConfig c;
  c.method = method_from_string(get_field<std::string>(j, "", "method"));
  c.num_clients = get_field<int>(j, "", "num_clients");
  c.rounds = get_field<int>(j, "", "rounds");
  c.e_local = get_field_or<int>(j, "", "e_local", 1);
  c.e_distill = get_field_or<int>(j, "", "e_distill", 1);
  c.temperature = get_field_or<double>(j, "", "temperature", 1.0);
  c.batch_size = get_field_or<int>(j, "", "batch_size", 32);
  c.learning_rate = get_field_or<double>(j, "", "learning_rate", 0.001);

  const std::string opt = get_field_or<std::string>(j, "", "optimizer", "adam");
  if (opt == "adam") c.optimizer = OptimizerKind::kAdam;
  else if (opt == "sgd") c.optimizer = OptimizerKind::kSgd;
  else throw ConfigError("optimizer: unknown value '" + opt + "' (adam or sgd)");

  if (j.contains("scheduler")) {
    const auto& s = j.at("scheduler");
    check_keys(s, "scheduler", {"kind", "step_size", "gamma"});
    const std::string kind = get_field_or<std::string>(s, "scheduler.", "kind", "step_decay");
    if (kind == "step_decay") c.scheduler.kind = SchedulerKind::kStepDecay;
    else if (kind == "none") c.scheduler.kind = SchedulerKind::kNone;
    else throw ConfigError("scheduler.kind: unknown value '" + kind + "'");
    c.scheduler.step_size = get_field_or<int>(s, "scheduler.", "step_size", 10);
    c.scheduler.gamma = get_field_or<double>(s, "scheduler.", "gamma", 0.7);
  }

  c.public_contribution_fraction =
      get_field_or<double>(j, "", "public_contribution_fraction", 0.1);
  c.public_batch_size = get_field_or<int>(j, "", "public_batch_size", 0);
  c.dirichlet_alpha = get_field<double>(j, "", "dirichlet_alpha");
  c.test_fraction = get_field_or<double>(j, "", "test_fraction", 0.2);

  if (j.contains("covariate_shift")) {
    const auto& s = j.at("covariate_shift");
    check_keys(s, "covariate_shift", {"kind", "magnitude", "begin_client", "end_client"});
    c.covariate_shift.kind =
        shift_kind_from_string(get_field_or<std::string>(s, "covariate_shift.", "kind", "none"));
    c.covariate_shift.magnitude = get_field_or<double>(s, "covariate_shift.", "magnitude", 0.0);
    c.covariate_shift.begin_client = get_field_or<int>(s, "covariate_shift.", "begin_client", 0);
    c.covariate_shift.end_client = get_field_or<int>(s, "covariate_shift.", "end_client", 0);
  }

  if (!j.contains("model_tiers")) throw ConfigError("model_tiers: required field is missing");
  if (!j.at("model_tiers").is_array()) throw ConfigError("model_tiers: expected an array");
  int tier_index = 0;
  for (const auto& t : j.at("model_tiers")) {
    const std::string path = "model_tiers[" + std::to_string(tier_index++) + "]";
    check_keys(t, path, {"name", "hidden_layers", "activation"});
    ModelTier tier;
    tier.name = get_field_or<std::string>(t, path + ".", "name",
                                          "tier-" + std::to_string(tier_index - 1));
    tier.hidden_layers = get_field_or<std::vector<int>>(t, path + ".", "hidden_layers", {});
    tier.activation =
        activation_from_string(get_field_or<std::string>(t, path + ".", "activation", "relu"));
    c.model_tiers.push_back(std::move(tier));
  }

  c.tier_assignment = get_field_or<std::vector<int>>(j, "", "tier_assignment", {});

  if (!j.contains("dataset")) throw ConfigError("dataset: required field is missing");
  const auto& d = j.at("dataset");
  const std::string dkind = get_field<std::string>(d, "dataset.", "kind");
  if (dkind == "synthetic") {
    check_keys(d, "dataset",
               {"kind", "num_classes", "feature_dim", "samples_per_class", "class_separation"});
    c.dataset.kind = DatasetConfig::Kind::kSynthetic;
    c.dataset.num_classes = get_field<int>(d, "dataset.", "num_classes");
    c.dataset.feature_dim = get_field<int>(d, "dataset.", "feature_dim");
    c.dataset.samples_per_class = get_field<int>(d, "dataset.", "samples_per_class");
    c.dataset.class_separation = get_field_or<double>(d, "dataset.", "class_separation", 5.0);
  } else if (dkind == "csv") {
    check_keys(d, "dataset", {"kind", "path", "has_header"});
    c.dataset.kind = DatasetConfig::Kind::kCsv;
    c.dataset.path = get_field<std::string>(d, "dataset.", "path");
    c.dataset.has_header = get_field_or<bool>(d, "dataset.", "has_header", false);
  } else {
    throw ConfigError("dataset.kind: unknown value '" + dkind + "' (synthetic or csv)");
  }

  c.master_seed = get_field<std::uint64_t>(j, "", "master_seed");

  c.validate();
  return c;
}

inline ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["method"] = to_string(c.method);
  j["num_clients"] = c.num_clients;
  j["rounds"] = c.rounds;
  j["e_local"] = c.e_local;
  j["e_distill"] = c.e_distill;
  j["temperature"] = c.temperature;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["optimizer"] = c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd";
  j["scheduler"] = {{"kind", c.scheduler.kind == SchedulerKind::kStepDecay ? "step_decay" : "none"},
                    {"step_size", c.scheduler.step_size},
                    {"gamma", c.scheduler.gamma}};
  j["public_contribution_fraction"] = c.public_contribution_fraction;
  j["public_batch_size"] = c.public_batch_size;
  j["dirichlet_alpha"] = c.dirichlet_alpha;
  j["test_fraction"] = c.test_fraction;
  j["covariate_shift"] = {{"kind", to_string(c.covariate_shift.kind)},
                          {"magnitude", c.covariate_shift.magnitude},
                          {"begin_client", c.covariate_shift.begin_client},
                          {"end_client", c.covariate_shift.end_client}};
  j["model_tiers"] = ordered_json::array();
  for (const auto& t : c.model_tiers)
    j["model_tiers"].push_back({{"name", t.name},
                                {"hidden_layers", t.hidden_layers},
                                {"activation", to_string(t.activation)}});
  j["tier_assignment"] = c.tier_assignment;
  if (c.dataset.kind == DatasetConfig::Kind::kSynthetic) {
    j["dataset"] = {{"kind", "synthetic"},
                    {"num_classes", c.dataset.num_classes},
                    {"feature_dim", c.dataset.feature_dim},
                    {"samples_per_class", c.dataset.samples_per_class},
                    {"class_separation", c.dataset.class_separation}};
  } else {
    j["dataset"] = {{"kind", "csv"},
                    {"path", c.dataset.path},
                    {"has_header", c.dataset.has_header}};
  }
  j["master_seed"] = c.master_seed;
  return j;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace fedkd
