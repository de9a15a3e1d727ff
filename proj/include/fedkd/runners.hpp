#pragma once

#include <atomic>
#include <chrono>
#include <cstring>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fedkd/config.hpp"
#include "fedkd/federation.hpp"
#include "fedkd/metrics.hpp"

namespace fedkd {

struct RoundRecord {
  int round = 0;
  std::vector<std::vector<double>> local_losses;    // [client][epoch]
  std::vector<std::vector<double>> distill_losses;  // [client][epoch], fedadas only
  std::uint64_t aggregate_digest = 0;  // ensemble (fedadas) or averaged params (fedavg)
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;
  double wall_ms = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RoundRecord> rounds;
  EvalReport report;
  CommLedger ledger;
  double total_wall_ms = 0.0;
  std::vector<ClientState> final_states;
};

using RoundCallback = std::function<void(const RoundRecord&)>;

namespace detail {

[[noreturn]] inline void rethrow_with_context(const std::string& ctx) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(ctx + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(ctx + ": " + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError(ctx + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(ctx + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(ctx + ": " + e.what());
  }
}

// Runs fn(i) for i in [0, n). Work items are independent and write only to
// their own slots, so the schedule cannot affect results.
template <class Fn>
void parallel_for(int n, int threads, const Fn& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int spawn = std::min(threads, n);
  pool.reserve(static_cast<std::size_t>(spawn));
  for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::uint64_t fnv1a_bytes(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t digest_doubles(const std::vector<double>& values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    h = fnv1a_bytes(&bits, sizeof(bits), h);
  }
  return h;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace detail

// Client setup shared by all protocols: tiered specs, seeded initialization,
// fresh optimizer and scheduler per client.
inline std::vector<ClientState> make_clients(const ExperimentConfig& config,
                                             const std::vector<ClientPartition>& partitions) {
  if (static_cast<int>(partitions.size()) != config.num_clients)
    throw ConfigError("make_clients: partition count does not match num_clients");
  std::vector<ClientState> clients;
  clients.reserve(partitions.size());
  for (int i = 0; i < config.num_clients; ++i) {
    const auto& part = partitions[static_cast<std::size_t>(i)];
    const ModelTier& tier = config.model_tiers[static_cast<std::size_t>(config.tier_of(i))];
    const ModelSpec spec =
        materialize_spec(tier, part.train.feature_dim, part.train.num_classes);
    ClientState client;
    client.client_id = i;
    client.model = init_model(spec, derive_seed(config.master_seed, "model-init",
                                                static_cast<std::uint64_t>(i)));
    client.optimizer = make_optimizer(config.optimizer, config.learning_rate,
                                      client.model.parameters.size());
    client.scheduler.kind = config.scheduler.kind;
    client.scheduler.step_size = config.scheduler.step_size;
    client.scheduler.gamma = config.scheduler.gamma;
    client.partition = part;
    client.rng_seed = derive_seed(config.master_seed, "client-stream",
                                  static_cast<std::uint64_t>(i));
    clients.push_back(std::move(client));
  }
  return clients;
}

// One FedADAS round per Algorithm: server picks a batch, clients train
// locally and upload temperature-scaled soft labels, the server averages
// them, clients distill against the ensemble. The ledger bills uplink as
// the logit payload and downlink as ensemble plus index list.
inline ExperimentResult run_fedadas(const ExperimentConfig& config,
                                    const std::vector<ClientPartition>& partitions,
                                    const PublicDataset& public_data, int parallel = 1,
                                    const RoundCallback& on_round = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.config = config;
  result.final_states = make_clients(config, partitions);
  auto& clients = result.final_states;
  const int n = config.num_clients;
  const FedAdasServer server(config.master_seed);

  for (int round = 1; round <= config.rounds; ++round) {
    const auto round_start = std::chrono::steady_clock::now();
    RoundRecord record;
    record.round = round;
    record.local_losses.resize(static_cast<std::size_t>(n));
    record.distill_losses.resize(static_cast<std::size_t>(n));

    RoundBatch batch;
    try {
      batch = server.select_batch(public_data, config.public_batch_size, round);
    } catch (...) {
      detail::rethrow_with_context("round " + std::to_string(round) + " batch selection");
    }
    const std::uint64_t rows = static_cast<std::uint64_t>(batch.features.rows());
    const auto classes = static_cast<std::uint64_t>(partitions.front().train.num_classes);

    std::vector<SoftLabelMatrix> uploads(static_cast<std::size_t>(n));
    detail::parallel_for(n, parallel, [&](int i) {
      auto& client = clients[static_cast<std::size_t>(i)];
      try {
        record.local_losses[static_cast<std::size_t>(i)] =
            local_train(client, config.e_local, config.batch_size);
      } catch (...) {
        detail::rethrow_with_context("round " + std::to_string(round) +
                                     " local training, client " + std::to_string(i));
      }
      try {
        uploads[static_cast<std::size_t>(i)] =
            produce_soft_labels(client, batch, config.temperature);
      } catch (...) {
        detail::rethrow_with_context("round " + std::to_string(round) +
                                     " soft-label generation, client " + std::to_string(i));
      }
    });
    for (int i = 0; i < n; ++i)
      result.ledger.record(round, i, Direction::kUp, PayloadKind::kLogits,
                           wire::logits_bytes(rows, classes));

    SoftLabelMatrix ensemble;
    try {
      ensemble = server.aggregate(uploads);
    } catch (...) {
      detail::rethrow_with_context("round " + std::to_string(round) + " aggregation");
    }
    record.aggregate_digest = detail::digest_doubles(ensemble.probabilities.data());
    for (int i = 0; i < n; ++i) {
      result.ledger.record(round, i, Direction::kDown, PayloadKind::kLogits,
                           wire::logits_bytes(rows, classes));
      result.ledger.record(round, i, Direction::kDown, PayloadKind::kIndices,
                           wire::indices_bytes(rows));
    }

    detail::parallel_for(n, parallel, [&](int i) {
      try {
        record.distill_losses[static_cast<std::size_t>(i)] =
            distill(clients[static_cast<std::size_t>(i)], batch, ensemble, config.e_distill,
                    config.temperature, config.batch_size);
      } catch (...) {
        detail::rethrow_with_context("round " + std::to_string(round) +
                                     " distillation, client " + std::to_string(i));
      }
    });

    record.bytes_up = result.ledger.total_bytes({Direction::kUp, {}, {}, round});
    record.bytes_down = result.ledger.total_bytes({Direction::kDown, {}, {}, round});
    record.wall_ms = detail::elapsed_ms(round_start);
    if (on_round) on_round(record);
    result.rounds.push_back(std::move(record));
  }

  if (n >= 2) result.report = evaluate_fleet(clients);
  result.total_wall_ms = detail::elapsed_ms(t0);
  return result;
}

// Parameter-averaging baseline: local training, then a train-size-weighted
// mean of the parameter vectors broadcast back to everyone. Requires a
// single shared architecture.
inline ExperimentResult run_fedavg(const ExperimentConfig& config,
                                   const std::vector<ClientPartition>& partitions,
                                   int parallel = 1, const RoundCallback& on_round = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.config = config;
  result.final_states = make_clients(config, partitions);
  auto& clients = result.final_states;
  const int n = static_cast<int>(clients.size());

  for (const auto& client : clients)
    if (!(client.model.spec.hidden_layers == clients.front().model.spec.hidden_layers &&
          client.model.spec.activation == clients.front().model.spec.activation &&
          client.model.spec.input_dim == clients.front().model.spec.input_dim &&
          client.model.spec.num_classes == clients.front().model.spec.num_classes))
      throw ConfigError("FedAvg requires homogeneous architectures");

  double total_train = 0.0;
  for (const auto& client : clients) total_train += client.partition.train.size();
  const auto param_count = static_cast<std::uint64_t>(clients.front().model.spec.parameter_count());

  for (int round = 1; round <= config.rounds; ++round) {
    const auto round_start = std::chrono::steady_clock::now();
    RoundRecord record;
    record.round = round;
    record.local_losses.resize(static_cast<std::size_t>(n));

    detail::parallel_for(n, parallel, [&](int i) {
      try {
        record.local_losses[static_cast<std::size_t>(i)] =
            local_train(clients[static_cast<std::size_t>(i)], config.e_local, config.batch_size);
      } catch (...) {
        detail::rethrow_with_context("round " + std::to_string(round) +
                                     " local training, client " + std::to_string(i));
      }
    });

    // weighted mean, fixed client order
    std::vector<double> averaged(clients.front().model.parameters.size(), 0.0);
    for (const auto& client : clients) {
      const double weight = client.partition.train.size() / total_train;
      for (std::size_t p = 0; p < averaged.size(); ++p)
        averaged[p] += weight * client.model.parameters[p];
    }
    for (auto& client : clients) client.model.parameters = averaged;
    record.aggregate_digest = detail::digest_doubles(averaged);

    for (int i = 0; i < n; ++i) {
      result.ledger.record(round, i, Direction::kUp, PayloadKind::kParameters,
                           wire::parameters_bytes(param_count));
      result.ledger.record(round, i, Direction::kDown, PayloadKind::kParameters,
                           wire::parameters_bytes(param_count));
    }
    record.bytes_up = result.ledger.total_bytes({Direction::kUp, {}, {}, round});
    record.bytes_down = result.ledger.total_bytes({Direction::kDown, {}, {}, round});
    record.wall_ms = detail::elapsed_ms(round_start);
    if (on_round) on_round(record);
    result.rounds.push_back(std::move(record));
  }

  if (n >= 2) result.report = evaluate_fleet(clients);
  result.total_wall_ms = detail::elapsed_ms(t0);
  return result;
}

// Ablation baseline: the same local training schedule with no communication.
inline ExperimentResult run_local_only(const ExperimentConfig& config,
                                       const std::vector<ClientPartition>& partitions,
                                       int parallel = 1, const RoundCallback& on_round = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.config = config;
  result.final_states = make_clients(config, partitions);
  auto& clients = result.final_states;
  const int n = static_cast<int>(clients.size());

  for (int round = 1; round <= config.rounds; ++round) {
    const auto round_start = std::chrono::steady_clock::now();
    RoundRecord record;
    record.round = round;
    record.local_losses.resize(static_cast<std::size_t>(n));
    detail::parallel_for(n, parallel, [&](int i) {
      try {
        record.local_losses[static_cast<std::size_t>(i)] =
            local_train(clients[static_cast<std::size_t>(i)], config.e_local, config.batch_size);
      } catch (...) {
        detail::rethrow_with_context("round " + std::to_string(round) +
                                     " local training, client " + std::to_string(i));
      }
    });
    record.wall_ms = detail::elapsed_ms(round_start);
    if (on_round) on_round(record);
    result.rounds.push_back(std::move(record));
  }

  if (n >= 2) result.report = evaluate_fleet(clients);
  result.total_wall_ms = detail::elapsed_ms(t0);
  return result;
}

}  // namespace fedkd
