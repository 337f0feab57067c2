#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "rkridge/error.hpp"

namespace rkridge {

/// splitmix64 finalizer; used to derive independent seeds from structured keys.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive combination: mix64(a, b) != mix64(b, a) in general.
constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(mix64(a) ^ b);
}

/// FNV-1a over a label, for stream names such as "rk-ridge" or "iz/iz0".
constexpr std::uint64_t hash_label(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// mt19937_64 stream. Uniform draws use the top 53 bits; normals use
/// std::normal_distribution, so streams are reproducible within one build.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on (0, 1].
  double uniform_open_closed() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  double normal() { return normal_(engine_); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Draws index i with probability weights[i] / sum(weights) by binary search
/// over the prefix sums. Zero-weight indices are never returned.
class WeightedSampler {
 public:
  WeightedSampler() = default;

  explicit WeightedSampler(std::span<const double> weights)
      : weights_(weights.begin(), weights.end()), cumulative_(weights.size()) {
    if (weights_.empty()) throw UsageError("weighted sampler: no weights");
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
        throw UsageError("weighted sampler: weights must be finite and nonnegative");
      }
      acc += weights_[i];
      cumulative_[i] = acc;
    }
    if (!(acc > 0.0)) throw UsageError("weighted sampler: all weights are zero");
  }

  std::size_t size() const noexcept { return weights_.size(); }
  double total() const noexcept { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> cumulative() const noexcept { return cumulative_; }

  double probability(std::size_t i) const { return weights_.at(i) / total(); }

  /// Index i with cumulative[i-1] < target <= cumulative[i].
  std::size_t locate(double target) const {
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), target);
    std::size_t i = it == cumulative_.end() ? cumulative_.size() - 1
                                            : static_cast<std::size_t>(it - cumulative_.begin());
    while (i > 0 && weights_[i] == 0.0) --i;  // only reachable past the end; never return a zero weight
    return i;
  }

  std::size_t sample(SeededRng& rng) const { return locate(rng.uniform_open_closed() * total()); }

 private:
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

}  // namespace rkridge
