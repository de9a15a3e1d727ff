#pragma once

// Test-only reference implementations, deliberately naive and kept
// independent of the library's forward/backward code paths.

#include <cmath>
#include <functional>
#include <vector>

#include "fedkd/matrix.hpp"
#include "fedkd/model.hpp"

namespace oracles {

// Forward pass re-derived from the flat parameter vector with plain
// triple loops; shares nothing with fedkd::forward internals.
inline fedkd::Matrix naive_forward(const fedkd::Model& model, const fedkd::Matrix& x) {
  using fedkd::Matrix;
  std::vector<int> widths;
  widths.push_back(model.spec.input_dim);
  for (int h : model.spec.hidden_layers) widths.push_back(h);
  widths.push_back(model.spec.num_classes);

  Matrix cur = x;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    Matrix next(cur.rows(), out);
    for (int r = 0; r < cur.rows(); ++r) {
      for (int o = 0; o < out; ++o) {
        double acc = model.parameters[offset + static_cast<std::size_t>(in) * out + o];
        for (int j = 0; j < in; ++j)
          acc += cur(r, j) * model.parameters[offset + static_cast<std::size_t>(o) * in + j];
        next(r, o) = acc;
      }
    }
    offset += static_cast<std::size_t>(in) * out + out;
    const bool last = (l + 2 == widths.size());
    if (!last) {
      for (double& v : next.data()) {
        if (model.spec.activation == fedkd::Activation::kRelu)
          v = v > 0.0 ? v : 0.0;
        else
          v = std::tanh(v);
      }
    }
    cur = next;
  }
  return cur;
}

// Central finite differences of an arbitrary scalar function of the
// parameter vector.
inline std::vector<double> finite_difference_gradient(
    const fedkd::Model& model, const std::function<double(const fedkd::Model&)>& loss_fn,
    double step = 1e-5) {
  std::vector<double> grad(model.parameters.size());
  fedkd::Model probe = model;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double saved = probe.parameters[i];
    probe.parameters[i] = saved + step;
    const double up = loss_fn(probe);
    probe.parameters[i] = saved - step;
    const double down = loss_fn(probe);
    probe.parameters[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

// Per-coordinate relative error with an absolute floor of 1.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// KL(p || q) over explicit probability vectors.
inline double scalar_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  return kl;
}

// Per-cell mean of a stack of equally shaped matrices, double loop.
inline fedkd::Matrix naive_mean(const std::vector<fedkd::Matrix>& ms) {
  fedkd::Matrix out(ms.front().rows(), ms.front().cols());
  for (const auto& m : ms)
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) out(r, c) += m(r, c);
  for (double& v : out.data()) v /= static_cast<double>(ms.size());
  return out;
}

}  // namespace oracles
