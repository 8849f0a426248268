#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>

#include "harness/lattice.hpp"

namespace harness {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

/// Derives an independent stream key from a parent key and a tag.
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t tag) {
  return mix64(key ^ mix64(tag + 0x9e3779b97f4a7c15ULL));
}

std::uint64_t site_key(std::uint64_t seed, const Site& site);

/// Counter-based generator: draw k of key K is mix64(K + k * golden), so any
/// draw can be recomputed from (key, counter) without replaying the stream.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return at(counter_++); }

  result_type at(std::uint64_t counter) const {
    return mix64(key_ + counter * 0x9e3779b97f4a7c15ULL);
  }

  std::uint64_t counter() const { return counter_; }
  void seek(std::uint64_t counter) { counter_ = counter; }

  /// Uniform on (0, 1): never returns 0 or 1.
  double uniform() { return to_open_unit((*this)()); }
  double exponential() { return -std::log(uniform()); }
  double gaussian() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  static double to_open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// Centered unit-variance draw of the given law from two raw uniforms.
inline double noise_draw(NoiseLaw law, double u1, double u2) {
  switch (law) {
    case NoiseLaw::gaussian:
      return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    case NoiseLaw::uniform:
      return std::sqrt(3.0) * (2.0 * u1 - 1.0);
    case NoiseLaw::rademacher:
      return u1 < 0.5 ? -1.0 : 1.0;
  }
  return 0.0;
}

/// Alias-table sampler over a finite discrete law; one uniform per draw.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(std::span<const double> weights);

  int operator()(double u) const;
  std::size_t size() const { return threshold_.size(); }

 private:
  std::vector<double> threshold_;
  std::vector<int> alias_;
};

}  // namespace harness
