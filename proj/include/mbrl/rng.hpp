#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

namespace mbrl {

/// Counter-based 64-bit generator (SplitMix64 finalizer over key + counter).
///
/// Every stream is identified by a key; child streams are derived from a
/// parent key and a tag, so the value drawn by a component never depends on
/// how many draws other components made. Satisfies
/// UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * kGolden); }

  /// Independent child stream; `derive(t)` is a pure function of (key, t).
  Rng derive(std::uint64_t tag) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(tag + kGolden));
    return child;
  }

  /// Uniform on [0, 1) with 53 bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift; the bias is below 2^-64 * n and irrelevant here.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  /// Number of failures before the first success, success probability p.
  std::uint64_t geometric(double p) {
    if (p >= 1.0) return 0;
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-p)));
  }

  /// Index drawn from a (not necessarily normalized) nonnegative weight vector.
  Eigen::Index categorical(const Eigen::Ref<const Eigen::VectorXd>& weights) {
    const double total = weights.sum();
    double u = uniform() * total;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    // Round-off: return the last index with positive weight.
    for (Eigen::Index i = weights.size() - 1; i >= 0; --i)
      if (weights[i] > 0.0) return i;
    return weights.size() - 1;
  }

  /// Flat Dirichlet sample with every entry floored at `floor` then renormalized.
  Eigen::VectorXd dirichlet(Eigen::Index n, double floor = 1e-6) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double u = uniform();
      while (u <= 0.0) u = uniform();
      v[i] = -std::log(u);
    }
    v /= v.sum();
    v = v.cwiseMax(floor);
    return v / v.sum();
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mbrl
