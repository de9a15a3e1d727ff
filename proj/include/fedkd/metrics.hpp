#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fedkd/dataset.hpp"
#include "fedkd/federation.hpp"

namespace fedkd {

// Percent of argmax-correct predictions; ties resolve to the lowest class.
inline double accuracy(const Model& model, const LabeledDataset& dataset) {
  if (dataset.size() == 0) throw DataError("accuracy: empty dataset");
  const Matrix logits = forward(model, dataset.features);
  int correct = 0;
  for (int r = 0; r < logits.rows(); ++r) {
    int best = 0;
    for (int c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    if (best == dataset.labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return 100.0 * correct / logits.rows();
}

inline double balanced_accuracy(double personalization, double generalization) {
  return std::sqrt(personalization * generalization);
}

struct ClientEval {
  int client_id = 0;
  std::string capacity_tier;
  double personalization = 0.0;  // percent, own test shard
  double generalization = 0.0;   // percent, mean over the other clients' test shards
  double bam = 0.0;              // geometric mean of the two
};

struct EvalReport {
  std::vector<ClientEval> clients;
  double mean_personalization = 0.0;
  double mean_generalization = 0.0;
  double mean_bam = 0.0;
};

// personalization_i = acc(M_i, test_i); generalization_i = mean over j != i
// of acc(M_i, test_j); bam_i = sqrt(personalization_i * generalization_i).
inline EvalReport evaluate_fleet(const std::vector<ClientState>& states) {
  if (states.size() < 2)
    throw ConfigError("evaluate_fleet: needs at least 2 clients (generalization is undefined)");
  EvalReport report;
  for (const auto& self : states) {
    ClientEval eval;
    eval.client_id = self.client_id;
    eval.capacity_tier = self.model.spec.capacity_tier;
    eval.personalization = accuracy(self.model, self.partition.test);
    double sum = 0.0;
    for (const auto& other : states) {
      if (other.client_id == self.client_id) continue;
      sum += accuracy(self.model, other.partition.test);
    }
    eval.generalization = sum / static_cast<double>(states.size() - 1);
    eval.bam = balanced_accuracy(eval.personalization, eval.generalization);
    report.clients.push_back(eval);

    report.mean_personalization += eval.personalization;
    report.mean_generalization += eval.generalization;
    report.mean_bam += eval.bam;
  }
  const double n = static_cast<double>(states.size());
  report.mean_personalization /= n;
  report.mean_generalization /= n;
  report.mean_bam /= n;
  return report;
}

// Hardware profile of one model, used by the composite efficiency scores.
struct ProfileRecord {
  std::string model_label;
  double accuracy_percent = 0.0;
  double model_size_mb = 0.0;
  double inference_time_ms = 0.0;
  double epoch_time_min = 0.0;
};

// FPS x accuracy / model size.
inline double inference_efficiency(const ProfileRecord& r) {
  if (!(r.inference_time_ms > 0.0))
    throw ConfigError("inference_efficiency: inference_time must be > 0");
  if (!(r.model_size_mb > 0.0)) throw ConfigError("inference_efficiency: model_size must be > 0");
  return (1000.0 / r.inference_time_ms) * r.accuracy_percent / r.model_size_mb;
}

// accuracy / (epoch training time x model size).
inline double training_efficiency(const ProfileRecord& r) {
  if (!(r.epoch_time_min > 0.0)) throw ConfigError("training_efficiency: epoch_time must be > 0");
  if (!(r.model_size_mb > 0.0)) throw ConfigError("training_efficiency: model_size must be > 0");
  return r.accuracy_percent / (r.epoch_time_min * r.model_size_mb);
}

// Alert when a run of consecutive positive frames exceeds ceil(fps * 2),
// strictly; a negative frame resets the run. Returns 1-based frame indices,
// one per qualifying run.
inline std::vector<int> yawn_alert(const std::vector<int>& predictions, double fps) {
  if (!(fps > 0.0)) throw ConfigError("yawn_alert: fps must be > 0");
  const long long threshold = static_cast<long long>(std::ceil(fps * 2.0));
  std::vector<int> alerts;
  long long run = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i]) {
      run += 1;
      if (run == threshold + 1) alerts.push_back(static_cast<int>(i) + 1);
    } else {
      run = 0;
    }
  }
  return alerts;
}

}  // namespace fedkd
