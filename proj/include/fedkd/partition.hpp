#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fedkd/dataset.hpp"

namespace fedkd {

enum class ShiftKind { kNone, kAffineRotation, kMeanOffset };

inline std::string to_string(ShiftKind k) {
  switch (k) {
    case ShiftKind::kNone: return "none";
    case ShiftKind::kAffineRotation: return "affine_rotation";
    case ShiftKind::kMeanOffset: return "mean_offset";
  }
  return "none";
}

inline ShiftKind shift_kind_from_string(const std::string& s) {
  if (s == "none") return ShiftKind::kNone;
  if (s == "affine_rotation") return ShiftKind::kAffineRotation;
  if (s == "mean_offset") return ShiftKind::kMeanOffset;
  throw ConfigError("unknown covariate shift kind '" + s + "'");
}

struct ClientPartition {
  int client_id = 0;
  LabeledDataset train;
  LabeledDataset test;
  std::string shift_tag = "none";

  bool operator==(const ClientPartition&) const = default;
};

namespace detail {

// Integer apportionment of `total` by fractional weights, largest remainder.
inline std::vector<int> apportion(const std::vector<double>& weights, int total) {
  const std::size_t n = weights.size();
  std::vector<int> counts(n, 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = weights[i] * total;
    counts[i] = static_cast<int>(quota);
    assigned += counts[i];
    remainders.emplace_back(quota - counts[i], i);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int k = 0; k < total - assigned; ++k) counts[remainders[static_cast<std::size_t>(k)].second] += 1;
  return counts;
}

}  // namespace detail

// Dirichlet label-skew partitioning: for every class the sample mass is
// split across clients by a Dirichlet(alpha) draw, then each client's shard
// is stratified into train/test. Classes that would leave a client with a
// single sample are reassigned to the client holding the most of that class,
// so every present class can appear in both splits. The multiset union of
// all shards always equals the input dataset.
inline std::vector<ClientPartition> partition_non_iid(const LabeledDataset& dataset,
                                                      int num_clients, double dirichlet_alpha,
                                                      double test_fraction,
                                                      std::uint64_t seed) {
  dataset.validate();
  if (num_clients < 2) throw ConfigError("partition_non_iid: num_clients must be >= 2");
  if (!(dirichlet_alpha > 0.0)) throw ConfigError("partition_non_iid: dirichlet_alpha must be > 0");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("partition_non_iid: test_fraction must be in (0,1)");

  Rng rng(derive_seed(seed, "partition"));

  // Per-class index pools, shuffled.
  std::vector<std::vector<int>> class_indices(static_cast<std::size_t>(dataset.num_classes));
  for (int i = 0; i < dataset.size(); ++i)
    class_indices[static_cast<std::size_t>(dataset.labels[static_cast<std::size_t>(i)])].push_back(i);
  for (auto& pool : class_indices) rng.shuffle(pool);

  // assignment[client][class] -> sample indices. Extreme alpha can starve a
  // client entirely; redraw the proportions until every client is viable,
  // the usual remedy in label-skew benchmarks. Bounded so a genuinely
  // infeasible configuration still fails loudly.
  std::vector<std::vector<std::vector<int>>> assignment;
  int starving_client = -1;
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    assignment.assign(static_cast<std::size_t>(num_clients),
                      std::vector<std::vector<int>>(static_cast<std::size_t>(dataset.num_classes)));
    for (int c = 0; c < dataset.num_classes; ++c) {
      const auto& pool = class_indices[static_cast<std::size_t>(c)];
      if (pool.empty()) continue;
      const auto weights = rng.next_dirichlet(dirichlet_alpha, num_clients);
      const auto counts = detail::apportion(weights, static_cast<int>(pool.size()));
      std::size_t cursor = 0;
      for (int i = 0; i < num_clients; ++i) {
        auto& slot = assignment[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        slot.assign(pool.begin() + static_cast<std::ptrdiff_t>(cursor),
                    pool.begin() + static_cast<std::ptrdiff_t>(cursor + counts[static_cast<std::size_t>(i)]));
        cursor += static_cast<std::size_t>(counts[static_cast<std::size_t>(i)]);
      }
    }

    // A class present with a single sample cannot be split into nonempty
    // train and test halves; hand it to the largest holder of that class.
    for (int c = 0; c < dataset.num_classes; ++c) {
      for (int i = 0; i < num_clients; ++i) {
        auto& slot = assignment[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        if (slot.size() != 1) continue;
        int target = -1;
        std::size_t best = 1;
        for (int j = 0; j < num_clients; ++j) {
          if (j == i) continue;
          const auto& other = assignment[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
          if (other.size() > best) {
            best = other.size();
            target = j;
          }
        }
        if (target >= 0) {
          auto& dst = assignment[static_cast<std::size_t>(target)][static_cast<std::size_t>(c)];
          dst.push_back(slot.front());
          slot.clear();
        }
      }
    }

    // Viable: at least one class with two samples, no stuck singletons.
    starving_client = -1;
    for (int i = 0; i < num_clients && starving_client < 0; ++i) {
      bool has_class = false;
      for (const auto& slot : assignment[static_cast<std::size_t>(i)]) {
        if (slot.size() == 1) {
          starving_client = i;
          break;
        }
        if (slot.size() >= 2) has_class = true;
      }
      if (!has_class && starving_client < 0) starving_client = i;
    }
    if (starving_client < 0) break;
  }
  if (starving_client >= 0)
    throw ConfigError("partition_non_iid: client " + std::to_string(starving_client) +
                      " cannot receive two samples of any class; lower num_clients, raise "
                      "dirichlet_alpha, or provide more data");

  std::vector<ClientPartition> partitions;
  partitions.reserve(static_cast<std::size_t>(num_clients));
  for (int i = 0; i < num_clients; ++i) {
    std::vector<int> train_idx, test_idx;
    for (int c = 0; c < dataset.num_classes; ++c) {
      auto& slot = assignment[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
      if (slot.empty()) continue;
      const int n = static_cast<int>(slot.size());
      int n_test = static_cast<int>(std::lround(test_fraction * n));
      n_test = std::clamp(n_test, 1, n - 1);
      test_idx.insert(test_idx.end(), slot.begin(), slot.begin() + n_test);
      train_idx.insert(train_idx.end(), slot.begin() + n_test, slot.end());
    }
    if (train_idx.empty() || test_idx.empty())
      throw ConfigError("partition_non_iid: client " + std::to_string(i) +
                        " received no samples; lower num_clients or provide more data");
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    ClientPartition p;
    p.client_id = i;
    p.train = dataset.subset(train_idx);
    p.test = dataset.subset(test_idx);
    partitions.push_back(std::move(p));
  }
  return partitions;
}

// Deterministic affine feature transform; labels untouched. kind=none or
// magnitude=0 returns the partition unchanged. mean_offset adds a random
// unit direction scaled to norm `magnitude`; affine_rotation applies a
// Givens rotation of `magnitude` radians in a seeded pair of axes.
inline ClientPartition apply_covariate_shift(const ClientPartition& partition, ShiftKind kind,
                                             double magnitude, std::uint64_t seed) {
  if (magnitude < 0.0) throw ConfigError("apply_covariate_shift: magnitude must be >= 0");
  if (kind == ShiftKind::kNone || magnitude == 0.0) return partition;

  const int dim = partition.train.feature_dim;
  ClientPartition out = partition;
  Rng rng(derive_seed(seed, "covariate-shift"));
  auto transform_all = [&](auto&& fn) {
    for (Matrix* m : {&out.train.features, &out.test.features})
      for (int r = 0; r < m->rows(); ++r) fn(m->row(r));
  };

  if (kind == ShiftKind::kMeanOffset) {
    std::vector<double> direction(static_cast<std::size_t>(dim));
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& v : direction) {
        v = rng.next_normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (auto& v : direction) v *= magnitude / norm;
    transform_all([&](double* row) {
      for (int d = 0; d < dim; ++d) row[d] += direction[static_cast<std::size_t>(d)];
    });
  } else {  // affine rotation
    if (dim >= 2) {
      const auto axes = rng.sample_without_replacement(dim, 2);
      const int a = std::min(axes[0], axes[1]);
      const int b = std::max(axes[0], axes[1]);
      const double cos_t = std::cos(magnitude);
      const double sin_t = std::sin(magnitude);
      transform_all([&](double* row) {
        const double va = row[a];
        const double vb = row[b];
        row[a] = cos_t * va - sin_t * vb;
        row[b] = sin_t * va + cos_t * vb;
      });
    }
  }

  out.shift_tag = to_string(kind) + ":" + std::to_string(magnitude);
  return out;
}

}  // namespace fedkd
