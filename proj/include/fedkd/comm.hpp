#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedkd/errors.hpp"

namespace fedkd {

enum class Direction { kUp, kDown };
enum class PayloadKind { kLogits, kParameters, kIndices };

inline std::string to_string(Direction d) { return d == Direction::kUp ? "up" : "down"; }
inline std::string to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::kLogits: return "logits";
    case PayloadKind::kParameters: return "parameters";
    case PayloadKind::kIndices: return "indices";
  }
  return "logits";
}

// Wire accounting is declared, never measured: every payload costs element
// count times a fixed 32-bit element width, regardless of the 64-bit floats
// used in computation.
namespace wire {

inline constexpr std::uint64_t kElementBytes = 4;

inline std::uint64_t logits_bytes(std::uint64_t rows, std::uint64_t classes) {
  return rows * classes * kElementBytes;
}
inline std::uint64_t indices_bytes(std::uint64_t count) { return count * kElementBytes; }
inline std::uint64_t parameters_bytes(std::uint64_t parameter_count) {
  return parameter_count * kElementBytes;
}

// Per client per round: soft-label upload only.
inline std::uint64_t fedadas_uplink_bytes(std::uint64_t batch, std::uint64_t classes) {
  return logits_bytes(batch, classes);
}
// Per client per round: ensemble download plus the index list.
inline std::uint64_t fedadas_downlink_bytes(std::uint64_t batch, std::uint64_t classes) {
  return logits_bytes(batch, classes) + indices_bytes(batch);
}
// Per client per round: parameters up and back down.
inline std::uint64_t fedavg_round_bytes(std::uint64_t parameter_count) {
  return 2 * parameters_bytes(parameter_count);
}

inline double to_mb(std::uint64_t bytes) { return static_cast<double>(bytes) / 1e6; }

}  // namespace wire

struct CommRecord {
  int round = 0;
  int client_id = 0;
  Direction direction = Direction::kUp;
  PayloadKind payload_kind = PayloadKind::kLogits;
  std::uint64_t bytes = 0;
};

struct CommQuery {
  std::optional<Direction> direction;
  std::optional<PayloadKind> payload_kind;
  std::optional<int> client_id;
  std::optional<int> round;
};

class CommLedger {
 public:
  void record(int round, int client_id, Direction direction, PayloadKind kind,
              std::uint64_t bytes) {
    records_.push_back({round, client_id, direction, kind, bytes});
  }

  const std::vector<CommRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  std::uint64_t total_bytes(const CommQuery& query = {}) const {
    std::uint64_t total = 0;
    for (const auto& r : records_) {
      if (query.direction && *query.direction != r.direction) continue;
      if (query.payload_kind && *query.payload_kind != r.payload_kind) continue;
      if (query.client_id && *query.client_id != r.client_id) continue;
      if (query.round && *query.round != r.round) continue;
      total += r.bytes;
    }
    return total;
  }

  double total_mb(const CommQuery& query = {}) const { return wire::to_mb(total_bytes(query)); }

 private:
  std::vector<CommRecord> records_;
};

inline std::uint64_t comm_cost(const CommLedger& ledger, const CommQuery& query = {}) {
  return ledger.total_bytes(query);
}

}  // namespace fedkd
