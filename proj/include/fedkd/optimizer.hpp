#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fedkd/errors.hpp"
#include "fedkd/model.hpp"

namespace fedkd {

enum class OptimizerKind { kAdam, kSgd };
enum class SchedulerKind { kStepDecay, kNone };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
};

inline OptimizerState make_optimizer(OptimizerKind kind, double learning_rate,
                                     std::size_t parameter_count) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  OptimizerState s;
  s.kind = kind;
  s.learning_rate = learning_rate;
  if (kind == OptimizerKind::kAdam) {
    s.first_moment.assign(parameter_count, 0.0);
    s.second_moment.assign(parameter_count, 0.0);
  }
  return s;
}

// Step decay: effective_lr = base_lr * gamma^floor(epochs_seen / step_size).
struct SchedulerState {
  SchedulerKind kind = SchedulerKind::kStepDecay;
  int step_size = 10;
  double gamma = 0.7;
  std::int64_t epochs_seen = 0;

  double factor() const {
    if (kind == SchedulerKind::kNone) return 1.0;
    return std::pow(gamma, static_cast<double>(epochs_seen / step_size));
  }
  double effective_lr(double base_lr) const { return base_lr * factor(); }

  void validate() const {
    if (kind == SchedulerKind::kStepDecay) {
      if (step_size <= 0) throw ConfigError("scheduler.step_size must be positive");
      if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("scheduler.gamma must be in (0,1]");
    }
  }
};

// One optimizer step in place. Adam uses bias-corrected moments; SGD is the
// plain theta -= lr * g rule. The learning rate is the scheduler-adjusted one.
inline void apply_update(Model& model, const std::vector<double>& gradient,
                         OptimizerState& opt, const SchedulerState& sched) {
  if (gradient.size() != model.parameters.size())
    throw ShapeError("apply_update: gradient length " + std::to_string(gradient.size()) +
                     " does not match parameter count " +
                     std::to_string(model.parameters.size()));
  for (double g : gradient)
    if (!std::isfinite(g)) throw NumericError("apply_update: non-finite gradient");

  const double lr = sched.effective_lr(opt.learning_rate);
  opt.step_count += 1;

  if (opt.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < gradient.size(); ++i)
      model.parameters[i] -= lr * gradient[i];
    return;
  }

  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    const double g = gradient[i];
    opt.first_moment[i] = opt.beta1 * opt.first_moment[i] + (1.0 - opt.beta1) * g;
    opt.second_moment[i] = opt.beta2 * opt.second_moment[i] + (1.0 - opt.beta2) * g * g;
    const double m_hat = opt.first_moment[i] / bc1;
    const double v_hat = opt.second_moment[i] / bc2;
    model.parameters[i] -= lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
  }
}

}  // namespace fedkd
