#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "das/tensor.hpp"

namespace das {

namespace detail {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

// Counter-based stream: draw i is mix64(seed + (i + 1) * gamma), so any
// (seed, counter) pair reproduces the same sequence on every platform.
class RandomStream {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-counter";
  static constexpr double kUniformEps = 1e-12;

  explicit RandomStream(std::uint64_t seed = 0, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  // Independent stream keyed by (master seed, label).
  static RandomStream derive(std::uint64_t master_seed, std::string_view label) {
    return RandomStream(detail::mix64(detail::mix64(master_seed) ^ detail::fnv1a64(label)));
  }

  RandomStream derive(std::string_view label) const { return derive(seed_, label); }

  RandomStream derive(std::uint64_t index) const {
    return RandomStream(detail::mix64(detail::mix64(seed_ ^ 0x5851F42D4C957F2DULL) + index * detail::kGoldenGamma));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(seed_ + counter_ * detail::kGoldenGamma);
  }

  // In [eps, 1 - eps]; never 0 or 1, so the double log below stays finite.
  double next_uniform() {
    const double u = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    return std::clamp(u, kUniformEps, 1.0 - kUniformEps);
  }

  double next_gumbel() { return -std::log(-std::log(next_uniform())); }

  // Box-Muller; consumes two draws.
  double next_normal() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n) by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

inline double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

inline Tensor sample_uniform(RandomStream& stream, const Shape& shape) {
  Tensor t(shape);
  for (double& v : t.data()) v = stream.next_uniform();
  return t;
}

inline Tensor sample_gumbel(RandomStream& stream, const Shape& shape) {
  Tensor t(shape);
  for (double& v : t.data()) v = stream.next_gumbel();
  return t;
}

inline Tensor sample_normal(RandomStream& stream, const Shape& shape, double stddev = 1.0) {
  Tensor t(shape);
  for (double& v : t.data()) v = stddev * stream.next_normal();
  return t;
}

}  // namespace das
