#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fedkd/matrix.hpp"
#include "fedkd/model.hpp"

namespace fedkd {

namespace detail {

inline void check_temperature(double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be > 0");
}

}  // namespace detail

// Row-wise log softmax of logits/temperature, max-subtracted so that
// arbitrarily large logits stay finite.
inline Matrix log_softmax(const Matrix& logits, double temperature) {
  detail::check_temperature(temperature);
  Matrix out(logits.rows(), logits.cols());
  for (int r = 0; r < logits.rows(); ++r) {
    const double* in = logits.row(r);
    double* o = out.row(r);
    double maxv = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < logits.cols(); ++c) maxv = std::max(maxv, in[c] / temperature);
    double sum = 0.0;
    for (int c = 0; c < logits.cols(); ++c) {
      o[c] = in[c] / temperature - maxv;
      sum += std::exp(o[c]);
    }
    const double log_sum = std::log(sum);
    for (int c = 0; c < logits.cols(); ++c) o[c] -= log_sum;
  }
  return out;
}

inline Matrix softmax(const Matrix& logits, double temperature) {
  Matrix out = log_softmax(logits, temperature);
  for (double& v : out.data()) v = std::exp(v);
  return out;
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> gradient;  // same length as model.parameters
};

namespace detail {

// Backpropagates d(loss)/d(logits) through the dense stack; returns the
// flat parameter gradient in canonical layout.
inline std::vector<double> backprop(const Model& model, const ForwardTrace& trace,
                                    Matrix dlogits) {
  const auto layers = layer_views(model.spec, model.parameters);
  std::vector<double> grad(model.parameters.size(), 0.0);

  // Locate each layer's slice of the flat gradient.
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& layer : layers) {
    offsets.push_back(offset);
    offset += static_cast<std::size_t>(layer.in) * layer.out + layer.out;
  }

  Matrix delta = std::move(dlogits);  // n x out of current layer
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const auto& layer = layers[static_cast<std::size_t>(l)];
    const Matrix& input = trace.post[static_cast<std::size_t>(l)];
    double* gw = grad.data() + offsets[static_cast<std::size_t>(l)];
    double* gb = gw + static_cast<std::size_t>(layer.in) * layer.out;

    for (int r = 0; r < delta.rows(); ++r) {
      const double* dr = delta.row(r);
      const double* xr = input.row(r);
      for (int o = 0; o < layer.out; ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        double* gwrow = gw + static_cast<std::size_t>(o) * layer.in;
        for (int j = 0; j < layer.in; ++j) gwrow[j] += d * xr[j];
        gb[o] += d;
      }
    }

    if (l > 0) {
      // delta_prev = (delta W) * act'(pre[l-1])
      const Matrix& pre_prev = trace.pre[static_cast<std::size_t>(l - 1)];
      Matrix prev(delta.rows(), layer.in);
      for (int r = 0; r < delta.rows(); ++r) {
        const double* dr = delta.row(r);
        double* pr = prev.row(r);
        for (int j = 0; j < layer.in; ++j) pr[j] = 0.0;
        for (int o = 0; o < layer.out; ++o) {
          const double d = dr[o];
          if (d == 0.0) continue;
          const double* wrow = layer.w + static_cast<std::size_t>(o) * layer.in;
          for (int j = 0; j < layer.in; ++j) pr[j] += d * wrow[j];
        }
        for (int j = 0; j < layer.in; ++j)
          pr[j] *= activate_grad(model.spec.activation, pre_prev(r, j));
      }
      delta = std::move(prev);
    }
  }
  return grad;
}

}  // namespace detail

// Mean negative log-likelihood of the integer labels under softmax(logits).
// d(loss)/d(logits) = (softmax - onehot) / n.
inline LossGrad cross_entropy_loss(const Model& model, const Matrix& features,
                                   const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != features.rows())
    throw ShapeError("cross_entropy_loss: one label per feature row required");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= model.spec.num_classes)
      throw DataError("cross_entropy_loss: label " + std::to_string(labels[i]) +
                      " out of range at row " + std::to_string(i));

  const ForwardTrace trace = forward_traced(model, features);
  const Matrix logp = log_softmax(trace.logits(), 1.0);
  const int n = features.rows();

  double loss = 0.0;
  Matrix dlogits(n, model.spec.num_classes);
  for (int r = 0; r < n; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    loss -= logp(r, y);
    for (int c = 0; c < model.spec.num_classes; ++c)
      dlogits(r, c) = (std::exp(logp(r, c)) - (c == y ? 1.0 : 0.0)) / n;
  }
  loss /= n;

  LossGrad out;
  out.loss = loss;
  out.gradient = detail::backprop(model, trace, std::move(dlogits));
  return out;
}

// Distillation loss: tau^2 times the batch-mean KL divergence from the
// ensemble distribution (reference) to the student's temperature-tau
// softmax, the student entering through log softmax. Zero exactly when the
// student matches the ensemble. d(loss)/d(logits) = tau (student - ensemble) / n.
inline LossGrad kd_loss(const Model& model, const Matrix& features,
                        const Matrix& ensemble, double temperature) {
  detail::check_temperature(temperature);
  if (ensemble.rows() != features.rows() || ensemble.cols() != model.spec.num_classes)
    throw ShapeError("kd_loss: ensemble shape does not match batch/model");
  for (int r = 0; r < ensemble.rows(); ++r) {
    double sum = 0.0;
    for (int c = 0; c < ensemble.cols(); ++c) {
      if (ensemble(r, c) < 0.0)
        throw ProtocolError("kd_loss: negative probability in ensemble row " + std::to_string(r));
      sum += ensemble(r, c);
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw ProtocolError("kd_loss: ensemble row " + std::to_string(r) +
                          " sums to " + std::to_string(sum) + ", expected 1");
  }

  const ForwardTrace trace = forward_traced(model, features);
  const Matrix student_logp = log_softmax(trace.logits(), temperature);
  const int n = features.rows();
  const int classes = model.spec.num_classes;
  const double tau2 = temperature * temperature;

  double loss = 0.0;
  Matrix dlogits(n, classes);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < classes; ++c) {
      const double t = ensemble(r, c);
      const double s = std::exp(student_logp(r, c));
      if (t > 0.0) loss += t * (std::log(t) - student_logp(r, c));
      dlogits(r, c) = temperature * (s - t) / n;
    }
  }
  loss = tau2 * loss / n;

  LossGrad out;
  out.loss = loss;
  out.gradient = detail::backprop(model, trace, std::move(dlogits));
  return out;
}

}  // namespace fedkd
