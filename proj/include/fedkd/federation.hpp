#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fedkd/comm.hpp"
#include "fedkd/losses.hpp"
#include "fedkd/optimizer.hpp"
#include "fedkd/partition.hpp"
#include "fedkd/public_data.hpp"

namespace fedkd {

// One participant. Specs may differ across clients; nothing in the soft-label
// protocol ever compares parameter vectors between clients.
struct ClientState {
  int client_id = 0;
  Model model;
  OptimizerState optimizer;
  SchedulerState scheduler;
  ClientPartition partition;

  // Stream base for epoch shuffles, derived once from the master seed so a
  // client's draws are independent of every other client's execution.
  std::uint64_t rng_seed = 0;
  std::int64_t shuffle_counter = 0;
};

// Per-sample class distributions over one round batch. producer is the
// client id, or kEnsembleProducer for the server-side mean.
struct SoftLabelMatrix {
  static constexpr int kEnsembleProducer = -1;

  int round = 0;
  int producer = kEnsembleProducer;
  Matrix probabilities;

  void validate() const {
    for (int r = 0; r < probabilities.rows(); ++r) {
      double sum = 0.0;
      for (int c = 0; c < probabilities.cols(); ++c) {
        if (probabilities(r, c) < 0.0)
          throw ProtocolError("soft labels: negative entry in row " + std::to_string(r));
        sum += probabilities(r, c);
      }
      if (std::abs(sum - 1.0) > 1e-6)
        throw ProtocolError("soft labels: row " + std::to_string(r) + " sums to " +
                            std::to_string(sum));
    }
  }
};

namespace detail {

// Minibatch pass over (features, target) pairs with a per-epoch shuffle
// drawn from the client's own stream. Returns the mean loss per epoch.
template <class LossFn>
std::vector<double> run_epochs(ClientState& client, int epochs, int batch_size, int num_rows,
                               bool advance_scheduler, const LossFn& loss_fn) {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");

  std::vector<double> epoch_losses;
  epoch_losses.reserve(static_cast<std::size_t>(epochs));
  for (int e = 0; e < epochs; ++e) {
    std::vector<int> order(static_cast<std::size_t>(num_rows));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(client.rng_seed, "epoch-shuffle",
                        static_cast<std::uint64_t>(client.shuffle_counter)));
    client.shuffle_counter += 1;
    rng.shuffle(order);

    double loss_sum = 0.0;
    int batches = 0;
    for (int start = 0; start < num_rows; start += batch_size) {
      const int stop = std::min(start + batch_size, num_rows);
      std::vector<int> rows(order.begin() + start, order.begin() + stop);
      const LossGrad lg = loss_fn(client.model, rows);
      try {
        apply_update(client.model, lg.gradient, client.optimizer, client.scheduler);
      } catch (const NumericError& err) {
        throw NumericError("epoch " + std::to_string(e + 1) + ": " + err.what());
      }
      loss_sum += lg.loss;
      ++batches;
    }
    epoch_losses.push_back(batches ? loss_sum / batches : 0.0);
    if (advance_scheduler) client.scheduler.epochs_seen += 1;
  }
  return epoch_losses;
}

}  // namespace detail

// Supervised passes over the client's train shard with cross-entropy.
// Advances the scheduler by one per epoch; epochs=0 is a no-op.
inline std::vector<double> local_train(ClientState& client, int epochs, int batch_size) {
  const LabeledDataset& train = client.partition.train;
  try {
    return detail::run_epochs(
        client, epochs, batch_size, train.size(), /*advance_scheduler=*/true,
        [&](const Model& model, const std::vector<int>& rows) {
          const Matrix x = train.features.extract_rows(rows);
          std::vector<int> y;
          y.reserve(rows.size());
          for (int r : rows) y.push_back(train.labels[static_cast<std::size_t>(r)]);
          return cross_entropy_loss(model, x, y);
        });
  } catch (const NumericError& e) {
    throw NumericError("client " + std::to_string(client.client_id) +
                       " local training: " + e.what());
  }
}

// softmax(forward(model, batch), tau); pure.
inline SoftLabelMatrix produce_soft_labels(const ClientState& client, const RoundBatch& batch,
                                           double temperature) {
  if (batch.features.cols() != client.model.spec.input_dim)
    throw ProtocolError("client " + std::to_string(client.client_id) +
                        ": round batch feature width " + std::to_string(batch.features.cols()) +
                        " does not match model input " +
                        std::to_string(client.model.spec.input_dim));
  SoftLabelMatrix out;
  out.round = batch.round;
  out.producer = client.client_id;
  out.probabilities = softmax(forward(client.model, batch.features), temperature);
  return out;
}

// Unweighted per-cell mean over the client matrices, summed in ascending
// producer order so the result is bit-deterministic whatever the caller's
// collection order.
inline SoftLabelMatrix aggregate_soft_labels(const std::vector<SoftLabelMatrix>& matrices) {
  if (matrices.empty()) throw ProtocolError("aggregate_soft_labels: no matrices");
  std::vector<const SoftLabelMatrix*> ordered;
  ordered.reserve(matrices.size());
  for (const auto& m : matrices) ordered.push_back(&m);
  std::sort(ordered.begin(), ordered.end(),
            [](const SoftLabelMatrix* a, const SoftLabelMatrix* b) {
              return a->producer < b->producer;
            });

  const auto& first = *ordered.front();
  SoftLabelMatrix out;
  out.round = first.round;
  out.producer = SoftLabelMatrix::kEnsembleProducer;
  out.probabilities = Matrix(first.probabilities.rows(), first.probabilities.cols());
  for (const auto* m : ordered) {
    if (m->round != first.round)
      throw ProtocolError("aggregate_soft_labels: round mismatch (" + std::to_string(m->round) +
                          " vs " + std::to_string(first.round) + ")");
    if (m->probabilities.rows() != first.probabilities.rows() ||
        m->probabilities.cols() != first.probabilities.cols())
      throw ProtocolError("aggregate_soft_labels: shape mismatch from producer " +
                          std::to_string(m->producer));
    m->validate();
    for (int r = 0; r < out.probabilities.rows(); ++r)
      for (int c = 0; c < out.probabilities.cols(); ++c)
        out.probabilities(r, c) += m->probabilities(r, c);
  }
  for (double& v : out.probabilities.data()) v /= static_cast<double>(ordered.size());
  return out;
}

// Distillation passes against the ensemble over the round batch. Local
// labels are never read; the scheduler is not advanced (only supervised
// epochs count toward step decay).
inline std::vector<double> distill(ClientState& client, const RoundBatch& batch,
                                   const SoftLabelMatrix& ensemble, int epochs,
                                   double temperature, int batch_size) {
  if (ensemble.probabilities.rows() != batch.features.rows())
    throw ProtocolError("distill: ensemble rows do not match round batch");
  try {
    return detail::run_epochs(
        client, epochs, batch_size, batch.features.rows(), /*advance_scheduler=*/false,
        [&](const Model& model, const std::vector<int>& rows) {
          const Matrix x = batch.features.extract_rows(rows);
          const Matrix targets = ensemble.probabilities.extract_rows(rows);
          return kd_loss(model, x, targets, temperature);
        });
  } catch (const NumericError& e) {
    throw NumericError("client " + std::to_string(client.client_id) +
                       " distillation: " + e.what());
  }
}

// The soft-logit server. Its interface accepts public features, indices and
// soft-label matrices only; parameter vectors and local labels cannot reach
// it by construction.
class FedAdasServer {
 public:
  explicit FedAdasServer(std::uint64_t master_seed) : master_seed_(master_seed) {}

  RoundBatch select_batch(const PublicDataset& pub, int batch_size, int round) const {
    return select_round_batch(pub, batch_size, round, master_seed_);
  }

  SoftLabelMatrix aggregate(const std::vector<SoftLabelMatrix>& uploads) const {
    return aggregate_soft_labels(uploads);
  }

 private:
  std::uint64_t master_seed_;
};

}  // namespace fedkd
