#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "das/autodiff.hpp"
#include "das/param_store.hpp"

namespace das {

inline constexpr std::size_t kPoolGrid = 4;

struct ClassifierConfig {
  std::size_t channels = 1;
  std::size_t embed_dim = 32;
  std::size_t mlp_hidden = 32;
  std::size_t num_classes = 5;

  void validate() const {
    if (embed_dim < 1 || mlp_hidden < 1) throw UsageError("classifier widths must be positive");
    if (num_classes < 2) throw UsageError("need at least two classes");
    if (channels < 1) throw UsageError("need at least one channel");
  }
};

inline void init_classifier_params(ParameterStore& store, const ClassifierConfig& cfg, RandomStream& stream) {
  cfg.validate();
  const std::size_t in = cfg.channels * kPoolGrid * kPoolGrid;
  store.add("clf.embed.w", glorot_uniform(stream, in, cfg.embed_dim));
  store.add("clf.embed.b", Tensor(Shape{cfg.embed_dim}));
  store.add("clf.agg.wa", glorot_uniform(stream, cfg.embed_dim, cfg.embed_dim));
  store.add("clf.agg.v", glorot_uniform(stream, cfg.embed_dim, 1));
  store.add("clf.mlp.w1", glorot_uniform(stream, cfg.embed_dim, cfg.mlp_hidden));
  store.add("clf.mlp.b1", Tensor(Shape{cfg.mlp_hidden}));
  store.add("clf.mlp.w2", glorot_uniform(stream, cfg.mlp_hidden, cfg.num_classes));
  store.add("clf.mlp.b2", Tensor(Shape{cfg.num_classes}));
}

// [H*W, 16] matrix averaging each cell of an adaptive 4x4 grid.
inline Tensor adaptive_pool_matrix(std::size_t H, std::size_t W) {
  Tensor m(Shape{H * W, kPoolGrid * kPoolGrid});
  for (std::size_t gy = 0; gy < kPoolGrid; ++gy) {
    const std::size_t y0 = gy * H / kPoolGrid;
    const std::size_t y1 = ((gy + 1) * H + kPoolGrid - 1) / kPoolGrid;
    for (std::size_t gx = 0; gx < kPoolGrid; ++gx) {
      const std::size_t x0 = gx * W / kPoolGrid;
      const std::size_t x1 = ((gx + 1) * W + kPoolGrid - 1) / kPoolGrid;
      const double w = 1.0 / static_cast<double>((y1 - y0) * (x1 - x0));
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) m.at(y * W + x, gy * kPoolGrid + gx) = w;
    }
  }
  return m;
}

// 4x4 average pool, flatten with channels, affine + tanh. [B, k, C, H, W] -> [B, k, e].
inline Var frame_embed(const Var& frames, ParamBinding& params) {
  const Shape& s = frames.shape();
  if (s.size() != 5) throw ShapeError("frame_embed needs [B, k, C, H, W], got " + shape_str(s));
  const std::size_t B = s[0], k = s[1], C = s[2], H = s[3], W = s[4];
  if (H < kPoolGrid || W < kPoolGrid) {
    throw ShapeError("frame_embed needs H, W >= 4, got " + std::to_string(H) + "x" + std::to_string(W));
  }
  Var flat = reshape(frames, Shape{B * k * C, H * W});
  Var pooled = matmul(flat, constant(adaptive_pool_matrix(H, W)));
  Var features = reshape(pooled, Shape{B, k, C * kPoolGrid * kPoolGrid});
  return tanh(add(matmul(features, params("clf.embed.w")), params("clf.embed.b")));
}

// Additive attention pooling over the k axis: alpha_j = v . tanh(W_a E_j), output = sum_j softmax(alpha)_j E_j.
inline Var attention_aggregate(const Var& embeddings, ParamBinding& params) {
  const Shape& s = embeddings.shape();
  if (s.size() != 3 || s[1] < 1) throw ShapeError("attention_aggregate needs [B, k, e] with k >= 1");
  const std::size_t B = s[0], k = s[1], e = s[2];
  Var scores = reshape(matmul(tanh(matmul(embeddings, params("clf.agg.wa"))), params("clf.agg.v")), Shape{B, k});
  Var weights = reshape(softmax(scores, 1), Shape{B, 1, k});
  return reshape(matmul(weights, embeddings), Shape{B, e});
}

inline Var classify(const Var& aggregated, ParamBinding& params) {
  return add(matmul(tanh(add(matmul(aggregated, params("clf.mlp.w1")), params("clf.mlp.b1"))), params("clf.mlp.w2")),
             params("clf.mlp.b2"));
}

// Mean cross-entropy of [B, K] logits against integer labels.
inline Var cross_entropy(const Var& logits, const std::vector<int>& labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[0] != labels.size()) {
    throw ShapeError("cross_entropy: logits " + shape_str(s) + " for " + std::to_string(labels.size()) + " labels");
  }
  Tensor onehot(s);
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= s[1]) {
      throw UsageError("label " + std::to_string(labels[b]) + " outside [0, " + std::to_string(s[1]) + ")");
    }
    onehot.at(b, static_cast<std::size_t>(labels[b])) = 1.0;
  }
  return scale(sum_all(mul(log_softmax(logits, 1), constant(std::move(onehot)))), -1.0 / static_cast<double>(s[0]));
}

}  // namespace das
