#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "das/autodiff.hpp"
#include "das/features.hpp"
#include "das/param_store.hpp"
#include "das/random.hpp"

namespace das {

struct SamplerConfig {
  std::size_t feature_dim = kFeatureDim;
  std::size_t heads = 4;
  std::size_t k = 8;
  std::size_t hidden = 16;       // per-head MLP width
  std::size_t temp_hidden = 16;  // temperature MLP width
  double tau0 = 1.0;

  void validate() const {
    if (heads < 1) throw UsageError("sampler needs at least one head");
    if (k < 1) throw UsageError("sampler needs k >= 1");
    if (!(tau0 > 0.0)) throw UsageError("tau0 must be positive");
    if (hidden < 1 || temp_hidden < 1 || feature_dim < 1) throw UsageError("sampler widths must be positive");
  }
};

enum class SampleMode { train, eval };

inline std::string head_prefix(std::size_t h) { return "sampler.head" + std::to_string(h); }

inline void init_sampler_params(ParameterStore& store, const SamplerConfig& cfg, RandomStream& stream) {
  cfg.validate();
  const std::size_t d = cfg.feature_dim;
  // Zero base projection: all logits start equal, so an untrained sampler selects uniformly at random.
  store.add("sampler.base.w", Tensor(Shape{d, 1}));
  store.add("sampler.base.b", Tensor(Shape{1}));
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const std::string p = head_prefix(h);
    store.add(p + ".w1", glorot_uniform(stream, d, cfg.hidden));
    store.add(p + ".b1", Tensor(Shape{cfg.hidden}));
    store.add(p + ".w2", glorot_uniform(stream, cfg.hidden, cfg.k));
    store.add(p + ".b2", Tensor(Shape{cfg.k}));
  }
  store.add("sampler.temp.w1", glorot_uniform(stream, d, cfg.temp_hidden));
  store.add("sampler.temp.b1", Tensor(Shape{cfg.temp_hidden}));
  store.add("sampler.temp.w2", glorot_uniform(stream, cfg.temp_hidden, 1));
  store.add("sampler.temp.b2", Tensor(Shape{1}));
}

// tanh hidden layer, linear output.
inline Var mlp2(const Var& x, const Var& w1, const Var& b1, const Var& w2, const Var& b2) {
  return add(matmul(tanh(add(matmul(x, w1), b1)), w2), b2);
}

// a_base[b, t] = w . F[b, t] + b0.  F is [B, T, d].
inline Var base_attention(const Var& features, ParamBinding& params) {
  const std::size_t B = features.shape().at(0);
  const std::size_t T = features.shape().at(1);
  Var proj = matmul(features, params("sampler.base.w"));  // [B, T, 1]
  return add(reshape(proj, Shape{B, T}), params("sampler.base.b"));
}

// s_h = softplus(MLP_h(mean_t F)), [B, k], strictly positive.
inline Var head_scales(const Var& features, ParamBinding& params, const SamplerConfig& cfg, std::size_t h) {
  if (h >= cfg.heads) {
    throw UsageError("head index " + std::to_string(h) + " out of range for " + std::to_string(cfg.heads) + " heads");
  }
  const std::string p = head_prefix(h);
  Var pooled = mean(features, 1);
  return softplus(mlp2(pooled, params(p + ".w1"), params(p + ".b1"), params(p + ".w2"), params(p + ".b2")));
}

// A = (1/H) sum_h a_base (x) s_h, giving [B, k, T].
inline Var combine_heads(const Var& a_base, const std::vector<Var>& scales) {
  if (scales.empty()) throw UsageError("combine_heads needs at least one head");
  const std::size_t B = a_base.shape().at(0);
  const std::size_t T = a_base.shape().at(1);
  Var base = reshape(a_base, Shape{B, 1, T});
  std::optional<Var> total;
  for (const Var& s : scales) {
    if (s.shape().size() != 2 || s.shape()[0] != B) {
      throw ShapeError("head scales " + shape_str(s.shape()) + " do not match base attention " +
                       shape_str(a_base.shape()));
    }
    Var head = mul(reshape(s, Shape{B, s.shape()[1], 1}), base);
    total = total ? add(*total, head) : head;
  }
  if (scales.size() == 1) return *total;
  return scale(*total, 1.0 / static_cast<double>(scales.size()));
}

// tau = tau0 * (0.5 + sigmoid(MLP_temp(mean_t F))), [B], inside [0.5 tau0, 1.5 tau0].
inline Var adaptive_temperature(const Var& features, ParamBinding& params, const SamplerConfig& cfg) {
  const std::size_t B = features.shape().at(0);
  Var pooled = mean(features, 1);
  Var z = mlp2(pooled, params("sampler.temp.w1"), params("sampler.temp.b1"), params("sampler.temp.w2"),
               params("sampler.temp.b2"));
  return reshape(scale(shift(sigmoid(z), 0.5), cfg.tau0), Shape{B});
}

// Selection weights over input frames. `weights` carries hard values forward and
// soft gradients backward; `relaxed` is the soft matrix itself as a graph node.
// `temperature` is empty for strategies without one.
struct SamplingMatrix {
  Tensor soft;
  Tensor hard;
  Tensor logits;
  Tensor temperature;
  Var weights;
  Var relaxed;

  std::size_t batch() const { return hard.dim(0); }
  std::size_t rows() const { return hard.dim(1); }
  std::size_t frames() const { return hard.dim(2); }

  // [B][k] selected frame index per row.
  std::vector<std::vector<std::size_t>> selected() const {
    std::vector<std::vector<std::size_t>> out(batch(), std::vector<std::size_t>(rows()));
    for (std::size_t b = 0; b < batch(); ++b)
      for (std::size_t j = 0; j < rows(); ++j)
        for (std::size_t t = 0; t < frames(); ++t)
          if (hard.at(b, j, t) == 1.0) out[b][j] = t;
    return out;
  }
};

// One-hot at the first maximum of each row of a [B, k, T] tensor.
inline Tensor hard_one_hot(const Tensor& soft) {
  Tensor hard(soft.shape());
  const std::size_t T = soft.dim(2);
  const std::size_t rows = soft.size() / T;
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < T; ++t)
      if (soft[r * T + t] > soft[r * T + best]) best = t;
    hard[r * T + best] = 1.0;
  }
  return hard;
}

// P_soft = softmax_t((A + G) / tau); P_hard = one-hot argmax; weights are straight-through.
inline SamplingMatrix gumbel_softmax_with_noise(const Var& logits, const Var& tau, const Tensor& noise) {
  const Shape& s = logits.shape();
  if (s.size() != 3) throw ShapeError("logits must be [B, k, T], got " + shape_str(s));
  if (noise.shape() != s) throw ShapeError("noise " + shape_str(noise.shape()) + " vs logits " + shape_str(s));
  if (tau.shape() != Shape{s[0]}) throw ShapeError("temperature " + shape_str(tau.shape()) + " vs batch " + shape_str(s));
  if (!logits.value().all_finite()) throw NumericFault("non-finite sampling logits");
  for (double t : tau.value().data()) {
    if (!(t > 0.0)) throw NumericFault("temperature must be positive");
  }
  Var perturbed = div(add(logits, constant(noise)), reshape(tau, Shape{s[0], 1, 1}));
  Var soft = softmax(perturbed, 2);
  SamplingMatrix m;
  m.soft = soft.value();
  m.hard = hard_one_hot(m.soft);
  m.logits = logits.value();
  m.temperature = tau.value();
  m.weights = straight_through(m.hard, soft);
  m.relaxed = soft;
  return m;
}

// Train mode always draws Gumbel noise; eval mode draws it unless `deterministic`.
inline SamplingMatrix gumbel_softmax_sample(const Var& logits, const Var& tau, RandomStream& stream, SampleMode mode,
                                            bool deterministic = false) {
  const bool noisy = mode == SampleMode::train || !deterministic;
  Tensor noise = noisy ? sample_gumbel(stream, logits.shape()) : Tensor(logits.shape());
  return gumbel_softmax_with_noise(logits, tau, noise);
}

// output[b, j] = sum_t P[b, j, t] X[b, t], shape [B, k, C, H, W].
inline Var apply_sampling(const Var& weights, const FrameSequence& seq) {
  seq.validate();
  const Shape& s = weights.shape();
  if (s.size() != 3 || s[0] != seq.batch() || s[2] != seq.frames()) {
    throw ShapeError("sampling matrix " + shape_str(s) + " does not match frame sequence " +
                     shape_str(seq.data.shape()));
  }
  Var frames = constant(seq.data.reshaped(Shape{seq.batch(), seq.frames(), seq.frame_size()}));
  return reshape(matmul(weights, frames), Shape{s[0], s[1], seq.channels(), seq.height(), seq.width()});
}

inline Var apply_sampling(const SamplingMatrix& m, const FrameSequence& seq) { return apply_sampling(m.weights, seq); }

struct SamplerLogits {
  Var a_base;
  std::vector<Var> scales;
  Var logits;
  Var temperature;
};

inline SamplerLogits sampler_logits(const Var& features, ParamBinding& params, const SamplerConfig& cfg) {
  SamplerLogits out;
  out.a_base = base_attention(features, params);
  for (std::size_t h = 0; h < cfg.heads; ++h) out.scales.push_back(head_scales(features, params, cfg, h));
  out.logits = combine_heads(out.a_base, out.scales);
  out.temperature = adaptive_temperature(features, params, cfg);
  return out;
}

struct SampleOutput {
  Var frames;
  SamplingMatrix matrix;
};

inline SampleOutput sample_from_features(const FeatureTensor& features, const FrameSequence& seq,
                                         ParamBinding& params, const SamplerConfig& cfg, RandomStream& stream,
                                         SampleMode mode, bool deterministic = false) {
  if (cfg.k > seq.frames()) {
    throw UsageError("k = " + std::to_string(cfg.k) + " exceeds sequence length " + std::to_string(seq.frames()));
  }
  const SamplerLogits l = sampler_logits(constant(features.data), params, cfg);
  SampleOutput out;
  out.matrix = gumbel_softmax_sample(l.logits, l.temperature, stream, mode, deterministic);
  out.frames = apply_sampling(out.matrix, seq);
  return out;
}

// Full pipeline: descriptors, attention logits, temperature, Gumbel selection, frame gathering.
inline SampleOutput sample(const FrameSequence& seq, ParamBinding& params, const SamplerConfig& cfg,
                           RandomStream& stream, SampleMode mode, bool deterministic = false) {
  return sample_from_features(build_features(seq), seq, params, cfg, stream, mode, deterministic);
}

// Repeated selections across rows, for inspection only.
struct DedupReport {
  std::vector<std::size_t> unique_per_item;
  double mean_unique_fraction = 0.0;
};

inline DedupReport dedup_report(const SamplingMatrix& m) {
  DedupReport r;
  for (const auto& rows : m.selected()) {
    r.unique_per_item.push_back(std::set<std::size_t>(rows.begin(), rows.end()).size());
    r.mean_unique_fraction += static_cast<double>(r.unique_per_item.back()) / static_cast<double>(rows.size());
  }
  if (!r.unique_per_item.empty()) r.mean_unique_fraction /= static_cast<double>(r.unique_per_item.size());
  return r;
}

inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

// One JSON-lines record for batch item `b`.
inline nlohmann::json sampling_record(const std::string& item_id, const SamplingMatrix& m, std::size_t b) {
  nlohmann::json soft_rows = nlohmann::json::array();
  for (std::size_t j = 0; j < m.rows(); ++j) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t t = 0; t < m.frames(); ++t) row.push_back(round6(m.soft.at(b, j, t)));
    soft_rows.push_back(std::move(row));
  }
  nlohmann::json rec;
  rec["item_id"] = item_id;
  rec["temperature"] = m.temperature.size() ? nlohmann::json(m.temperature[b]) : nlohmann::json(nullptr);
  rec["selected_indices"] = m.selected()[b];
  rec["soft_rows"] = std::move(soft_rows);
  return rec;
}

inline void write_sampling_records(std::ostream& out, const std::vector<std::string>& item_ids,
                                   const SamplingMatrix& m) {
  for (std::size_t b = 0; b < m.batch(); ++b) out << sampling_record(item_ids.at(b), m, b).dump() << '\n';
}

}  // namespace das
