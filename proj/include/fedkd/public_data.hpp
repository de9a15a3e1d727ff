#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fedkd/partition.hpp"

namespace fedkd {

// Shared unlabeled pool assembled from client contributions. Labels are
// dropped at construction; only feature rows and contributor provenance
// survive.
struct PublicDataset {
  Matrix features;
  std::vector<int> contributor_ids;

  int size() const { return features.rows(); }
};

struct RoundBatch {
  int round = 0;
  std::vector<int> indices;  // into PublicDataset, unique
  Matrix features;           // the extracted rows, in index order
};

// Per client, floor(fraction * train size) rows drawn without replacement
// from the client's train shard. Contributions are copies; clients keep
// their full local shards.
inline PublicDataset build_public_dataset(const std::vector<ClientPartition>& partitions,
                                          double contribution_fraction, std::uint64_t seed) {
  if (!(contribution_fraction > 0.0 && contribution_fraction <= 1.0))
    throw ConfigError("build_public_dataset: contribution_fraction must be in (0,1]");
  if (partitions.empty()) throw ConfigError("build_public_dataset: no partitions");

  const int dim = partitions.front().train.feature_dim;
  PublicDataset pub;
  pub.features = Matrix(0, dim);
  for (const auto& p : partitions) {
    const int take = static_cast<int>(contribution_fraction * p.train.size());
    if (take < 1)
      throw ConfigError("build_public_dataset: client " + std::to_string(p.client_id) +
                        " would contribute no samples at fraction " +
                        std::to_string(contribution_fraction));
    Rng rng(derive_seed(seed, "public-contribution", static_cast<std::uint64_t>(p.client_id)));
    auto rows = rng.sample_without_replacement(p.train.size(), take);
    std::sort(rows.begin(), rows.end());
    for (int r : rows) {
      pub.features.append_row(p.train.features.row(r));
      pub.contributor_ids.push_back(p.client_id);
    }
  }
  return pub;
}

// Uniform sample of batch_size distinct indices, a pure function of
// (master_seed, round); every client sees the identical batch in a round.
inline RoundBatch select_round_batch(const PublicDataset& pub, int batch_size, int round,
                                     std::uint64_t master_seed) {
  if (batch_size <= 0) throw ConfigError("select_round_batch: batch_size must be positive");
  if (batch_size > pub.size())
    throw ConfigError("select_round_batch: batch_size " + std::to_string(batch_size) +
                      " exceeds public dataset size " + std::to_string(pub.size()));
  Rng rng(derive_seed(master_seed, "round-batch", static_cast<std::uint64_t>(round)));
  RoundBatch batch;
  batch.round = round;
  batch.indices = rng.sample_without_replacement(pub.size(), batch_size);
  batch.features = pub.features.extract_rows(batch.indices);
  return batch;
}

}  // namespace fedkd
