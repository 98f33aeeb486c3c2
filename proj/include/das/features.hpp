#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "das/tensor.hpp"

namespace das {

// Batch of frame stacks [B, T, C, H, W]; frames at t >= valid_len[b] are zero padding.
struct FrameSequence {
  Tensor data;
  std::vector<std::size_t> valid_len;

  std::size_t batch() const { return data.dim(0); }
  std::size_t frames() const { return data.dim(1); }
  std::size_t channels() const { return data.dim(2); }
  std::size_t height() const { return data.dim(3); }
  std::size_t width() const { return data.dim(4); }
  std::size_t frame_size() const { return channels() * height() * width(); }

  const double* frame(std::size_t b, std::size_t t) const {
    return data.data().data() + (b * frames() + t) * frame_size();
  }

  void validate() const {
    if (data.rank() != 5) throw ShapeError("frame sequence must be [B, T, C, H, W], got " + shape_str(data.shape()));
    if (valid_len.size() != batch()) {
      throw ShapeError("valid_len has " + std::to_string(valid_len.size()) + " entries for batch of " +
                       std::to_string(batch()));
    }
    for (std::size_t len : valid_len) {
      if (len < 1 || len > frames()) {
        throw ShapeError("valid_len " + std::to_string(len) + " outside [1, " + std::to_string(frames()) + "]");
      }
    }
    if (frame_size() < 1) throw ShapeError("frames must have at least one value");
  }
};

inline const std::vector<std::string>& default_channel_map() {
  static const std::vector<std::string> channels{"variance", "sobel-x", "sobel-y", "laplacian-4", "laplacian-8",
                                                 "intensity-mean"};
  return channels;
}

inline constexpr std::size_t kFeatureDim = 6;
inline constexpr double kStdFloor = 1e-8;

// Per-frame descriptors [B, T, d] with channel labels.
struct FeatureTensor {
  Tensor data;
  std::vector<std::string> channels = default_channel_map();

  std::size_t dim() const { return data.dim(2); }
};

using Kernel3 = std::array<std::array<double, 3>, 3>;

inline const std::array<Kernel3, 4>& edge_kernels() {
  static const std::array<Kernel3, 4> kernels{{
      {{{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}}},  // sobel-x
      {{{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}}},  // sobel-y
      {{{0, 1, 0}, {1, -4, 1}, {0, 1, 0}}},    // laplacian-4
      {{{1, 1, 1}, {1, -8, 1}, {1, 1, 1}}},    // laplacian-8
  }};
  return kernels;
}

// Population variance of each frame over (C, H, W).
inline Tensor frame_variance(const FrameSequence& seq) {
  seq.validate();
  Tensor out(Shape{seq.batch(), seq.frames()});
  const std::size_t n = seq.frame_size();
  for (std::size_t b = 0; b < seq.batch(); ++b) {
    for (std::size_t t = 0; t < seq.frames(); ++t) {
      const double* f = seq.frame(b, t);
      double mean = 0.0;
      double m2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double delta = f[i] - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (f[i] - mean);
      }
      out.at(b, t) = m2 / static_cast<double>(n);
    }
  }
  return out;
}

inline Tensor intensity_mean(const FrameSequence& seq) {
  seq.validate();
  Tensor out(Shape{seq.batch(), seq.frames()});
  const std::size_t n = seq.frame_size();
  for (std::size_t b = 0; b < seq.batch(); ++b) {
    for (std::size_t t = 0; t < seq.frames(); ++t) {
      const double* f = seq.frame(b, t);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += f[i];
      out.at(b, t) = s / static_cast<double>(n);
    }
  }
  return out;
}

// Mean absolute 3x3 response ("valid" borders) per kernel, averaged over channels. [B, T, 4].
inline Tensor edge_features(const FrameSequence& seq) {
  seq.validate();
  const std::size_t C = seq.channels();
  const std::size_t H = seq.height();
  const std::size_t W = seq.width();
  if (H < 3 || W < 3) {
    throw ShapeError("edge features need H, W >= 3, got " + std::to_string(H) + "x" + std::to_string(W));
  }
  const auto& kernels = edge_kernels();
  const double count = static_cast<double>(C * (H - 2) * (W - 2));
  Tensor out(Shape{seq.batch(), seq.frames(), kernels.size()});
  for (std::size_t b = 0; b < seq.batch(); ++b) {
    for (std::size_t t = 0; t < seq.frames(); ++t) {
      const double* f = seq.frame(b, t);
      std::array<double, 4> acc{};
      for (std::size_t c = 0; c < C; ++c) {
        const double* img = f + c * H * W;
        for (std::size_t y = 1; y + 1 < H; ++y) {
          for (std::size_t x = 1; x + 1 < W; ++x) {
            for (std::size_t k = 0; k < kernels.size(); ++k) {
              double r = 0.0;
              for (std::size_t dy = 0; dy < 3; ++dy)
                for (std::size_t dx = 0; dx < 3; ++dx) r += kernels[k][dy][dx] * img[(y + dy - 1) * W + (x + dx - 1)];
              acc[k] += std::abs(r);
            }
          }
        }
      }
      for (std::size_t k = 0; k < kernels.size(); ++k) out.at(b, t, k) = acc[k] / count;
    }
  }
  return out;
}

// Unstandardized descriptors [B, T, 6] in default_channel_map() order.
inline Tensor raw_features(const FrameSequence& seq) {
  const Tensor var = frame_variance(seq);
  const Tensor edges = edge_features(seq);
  const Tensor mean = intensity_mean(seq);
  Tensor out(Shape{seq.batch(), seq.frames(), kFeatureDim});
  for (std::size_t b = 0; b < seq.batch(); ++b) {
    for (std::size_t t = 0; t < seq.frames(); ++t) {
      out.at(b, t, 0) = var.at(b, t);
      for (std::size_t k = 0; k < 4; ++k) out.at(b, t, 1 + k) = edges.at(b, t, k);
      out.at(b, t, 5) = mean.at(b, t);
    }
  }
  return out;
}

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

// Per-channel mean and population std over valid frames only, std floored at kStdFloor.
inline FeatureStats compute_feature_stats(const Tensor& raw, const std::vector<std::size_t>& valid_len) {
  const std::size_t B = raw.dim(0);
  const std::size_t d = raw.dim(2);
  if (valid_len.size() != B) throw ShapeError("valid_len size does not match feature batch");
  FeatureStats s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  std::vector<double> m2(d, 0.0);
  double n = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < valid_len[b]; ++t) {
      n += 1.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double x = raw.at(b, t, c);
        const double delta = x - s.mean[c];
        s.mean[c] += delta / n;
        m2[c] += delta * (x - s.mean[c]);
      }
    }
  }
  for (std::size_t c = 0; c < d; ++c) s.stddev[c] = std::max(std::sqrt(m2[c] / n), kStdFloor);
  return s;
}

inline FeatureTensor standardize(const Tensor& raw, const FeatureStats& stats) {
  FeatureTensor f;
  f.data = Tensor(raw.shape());
  const std::size_t d = raw.dim(2);
  if (stats.mean.size() != d || stats.stddev.size() != d) throw ShapeError("feature stats do not match channel count");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::size_t c = i % d;
    f.data[i] = (raw[i] - stats.mean[c]) / stats.stddev[c];
  }
  return f;
}

// Descriptors standardized with this batch's own statistics.
inline FeatureTensor build_features(const FrameSequence& seq) {
  const Tensor raw = raw_features(seq);
  return standardize(raw, compute_feature_stats(raw, seq.valid_len));
}

// Exponential running estimate of batch statistics, used at inference.
class FeatureNormalizer {
 public:
  explicit FeatureNormalizer(double momentum = 0.1) : momentum_(momentum) {}

  void update(const FeatureStats& batch) {
    if (!initialized_) {
      running_ = batch;
      initialized_ = true;
      return;
    }
    for (std::size_t c = 0; c < running_.mean.size(); ++c) {
      running_.mean[c] = (1.0 - momentum_) * running_.mean[c] + momentum_ * batch.mean[c];
      running_.stddev[c] = (1.0 - momentum_) * running_.stddev[c] + momentum_ * batch.stddev[c];
    }
  }

  void set(FeatureStats stats) {
    running_ = std::move(stats);
    initialized_ = true;
  }

  bool initialized() const { return initialized_; }
  const FeatureStats& stats() const { return running_; }

 private:
  double momentum_;
  bool initialized_ = false;
  FeatureStats running_;
};

}  // namespace das
