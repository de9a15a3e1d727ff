#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "fedkd/errors.hpp"

namespace fedkd {

// Stateless SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives an independent substream seed from (base, tag, a, b). Every
// randomized stage keys its own stream this way, so results do not depend
// on the order in which clients or phases execute.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = mix64(base ^ fnv1a64(tag));
  s = mix64(s ^ a);
  return mix64(s ^ b);
}

// SplitMix64 counter-based generator: the state advances by a fixed constant
// per draw, so the i-th output is a pure function of (seed, i). All sampling
// helpers are hand-rolled on top of it to keep every draw bit-reproducible
// across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Unbiased integer in [0, n) via rejection sampling.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw ConfigError("Rng::next_below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    std::uint64_t x = next_u64();
    while (x < threshold) x = next_u64();
    return x % n;
  }

  // Standard normal, Box-Muller.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_unit();  // (0, 1], keeps log finite
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(angle);
    have_spare_ = true;
    return r * std::cos(angle);
  }

  // Gamma(alpha, 1), Marsaglia-Tsang squeeze method.
  double next_gamma(double alpha) {
    if (alpha <= 0.0) throw ConfigError("Rng::next_gamma: alpha must be positive");
    if (alpha < 1.0) {
      const double boost = std::pow(next_unit(), 1.0 / alpha);
      return next_gamma(alpha + 1.0) * boost;
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = next_normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = next_unit();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  std::vector<double> next_dirichlet(double alpha, int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (auto& v : w) {
      v = next_gamma(alpha);
      sum += v;
    }
    if (sum <= 0.0) sum = 1.0;
    for (auto& v : w) v /= sum;
    return w;
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices drawn uniformly from [0, n), in draw order
  // (partial Fisher-Yates).
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k > n) throw ConfigError("sample_without_replacement: k exceeds population");
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(next_below(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace fedkd
