#pragma once

#include <algorithm>
#include <array>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "das/sampler.hpp"

namespace das {

enum class StrategyKind { full, random, uniform, dps, das };

inline constexpr std::array<StrategyKind, 5> kAllStrategies{StrategyKind::full, StrategyKind::random,
                                                            StrategyKind::uniform, StrategyKind::dps,
                                                            StrategyKind::das};

inline std::string to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::full: return "full";
    case StrategyKind::random: return "random";
    case StrategyKind::uniform: return "uniform";
    case StrategyKind::dps: return "dps";
    case StrategyKind::das: return "das";
  }
  return "unknown";
}

inline StrategyKind parse_strategy(std::string_view s) {
  if (s == "full") return StrategyKind::full;
  if (s == "random") return StrategyKind::random;
  if (s == "uniform") return StrategyKind::uniform;
  if (s == "dps" || s == "dps-fixed") return StrategyKind::dps;
  if (s == "das") return StrategyKind::das;
  throw UsageError("unknown strategy: " + std::string(s));
}

inline bool is_learned(StrategyKind s) { return s == StrategyKind::dps || s == StrategyKind::das; }

inline void check_k(std::size_t T, std::size_t k) {
  if (k < 1 || k > T) {
    throw UsageError("need 1 <= k <= T, got k = " + std::to_string(k) + ", T = " + std::to_string(T));
  }
}

// index_j = floor((j + 0.5) T / k).
inline std::vector<std::size_t> uniform_indices(std::size_t T, std::size_t k) {
  check_k(T, k);
  std::vector<std::size_t> idx(k);
  for (std::size_t j = 0; j < k; ++j) idx[j] = ((2 * j + 1) * T) / (2 * k);
  return idx;
}

// k distinct indices drawn without replacement, sorted ascending.
inline std::vector<std::size_t> random_indices(std::size_t T, std::size_t k, RandomStream& stream) {
  check_k(T, k);
  std::vector<std::size_t> pool(T);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.next_below(T - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<std::size_t> idx(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Fixed selection: soft == hard, no trainable inputs.
inline SamplingMatrix one_hot_sampling(const std::vector<std::vector<std::size_t>>& indices, std::size_t T) {
  if (indices.empty()) throw ShapeError("one_hot_sampling needs a non-empty batch");
  const std::size_t k = indices.front().size();
  Tensor hard(Shape{indices.size(), k, T});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b].size() != k) throw ShapeError("ragged index lists in one_hot_sampling");
    for (std::size_t j = 0; j < k; ++j) {
      if (indices[b][j] >= T) throw ShapeError("selected index out of range");
      hard.at(b, j, indices[b][j]) = 1.0;
    }
  }
  SamplingMatrix m;
  m.hard = hard;
  m.soft = hard;
  m.weights = constant(std::move(hard));
  m.relaxed = m.weights;
  return m;
}

inline SamplingMatrix full_sampling(std::size_t B, std::size_t T) {
  std::vector<std::size_t> all(T);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return one_hot_sampling(std::vector<std::vector<std::size_t>>(B, all), T);
}

inline SamplingMatrix uniform_sampling(std::size_t B, std::size_t T, std::size_t k) {
  return one_hot_sampling(std::vector<std::vector<std::size_t>>(B, uniform_indices(T, k)), T);
}

inline SamplingMatrix random_sampling(std::size_t B, std::size_t T, std::size_t k, RandomStream& stream) {
  std::vector<std::vector<std::size_t>> idx;
  for (std::size_t b = 0; b < B; ++b) idx.push_back(random_indices(T, k, stream));
  return one_hot_sampling(idx, T);
}

inline void init_dps_params(ParameterStore& store, std::size_t k, std::size_t T) {
  store.add("dps.logits", Tensor(Shape{k, T}));
}

// Learned logits shared by every input, through the same Gumbel-softmax path at constant tau0.
inline SamplingMatrix dps_fixed_sampler(ParamBinding& params, std::size_t B, double tau0, RandomStream& stream,
                                        SampleMode mode, bool deterministic = false) {
  Var theta = params("dps.logits");
  const std::size_t k = theta.shape().at(0);
  const std::size_t T = theta.shape().at(1);
  Var logits = add(reshape(theta, Shape{1, k, T}), constant(Tensor(Shape{B, k, T})));
  Var tau = constant(Tensor(Shape{B}, tau0));
  return gumbel_softmax_sample(logits, tau, stream, mode, deterministic);
}

}  // namespace das
