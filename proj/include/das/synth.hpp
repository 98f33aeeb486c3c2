#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "das/baselines.hpp"
#include "das/binary_io.hpp"
#include "das/features.hpp"
#include "das/random.hpp"

namespace das {

enum class SignalKind { intensity_level, oriented_gradient };

inline std::string to_string(SignalKind k) {
  return k == SignalKind::intensity_level ? "intensity-level" : "oriented-gradient";
}

inline SignalKind parse_signal_kind(std::string_view s) {
  if (s == "intensity-level") return SignalKind::intensity_level;
  if (s == "oriented-gradient") return SignalKind::oriented_gradient;
  throw UsageError("unknown signal_kind: " + std::string(s));
}

enum class Split { train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw FormatError("unknown split tag: " + std::string(s));
}

struct SynthSpec {
  std::size_t num_items = 600;
  std::size_t num_classes = 5;
  std::size_t t_min = 12;
  std::size_t t_max = 16;
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t signal_frames = 3;
  double noise_std = 0.25;
  SignalKind signal_kind = SignalKind::intensity_level;
  std::uint64_t seed = 0;

  void validate() const {
    if (signal_frames > t_min) {
      throw UsageError("signal_frames (" + std::to_string(signal_frames) + ") exceeds t_min (" +
                       std::to_string(t_min) + ")");
    }
    if (num_classes < 2) throw UsageError("num_classes must be >= 2");
    if (!(noise_std >= 0.0)) throw UsageError("noise_std must be >= 0");
    if (t_min < 1 || t_min > t_max) throw UsageError("need 1 <= t_min <= t_max");
    if (channels < 1 || height < 4 || width < 4) throw UsageError("frames must be at least 1x4x4");
    if (num_items < 1) throw UsageError("num_items must be positive");
  }

  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

inline nlohmann::json to_json(const SynthSpec& s) {
  return {{"num_items", s.num_items},         {"num_classes", s.num_classes},
          {"t_min", s.t_min},                 {"t_max", s.t_max},
          {"channels", s.channels},           {"height", s.height},
          {"width", s.width},                 {"signal_frames", s.signal_frames},
          {"noise_std", s.noise_std},         {"signal_kind", to_string(s.signal_kind)},
          {"seed", s.seed}};
}

// Missing keys keep defaults; unknown keys are rejected.
inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  for (const auto& [key, v] : j.items()) {
    if (key == "num_items") s.num_items = v.get<std::size_t>();
    else if (key == "num_classes") s.num_classes = v.get<std::size_t>();
    else if (key == "t_min") s.t_min = v.get<std::size_t>();
    else if (key == "t_max") s.t_max = v.get<std::size_t>();
    else if (key == "channels") s.channels = v.get<std::size_t>();
    else if (key == "height") s.height = v.get<std::size_t>();
    else if (key == "width") s.width = v.get<std::size_t>();
    else if (key == "signal_frames") s.signal_frames = v.get<std::size_t>();
    else if (key == "noise_std") s.noise_std = v.get<double>();
    else if (key == "signal_kind") s.signal_kind = parse_signal_kind(v.get<std::string>());
    else if (key == "seed") s.seed = v.get<std::uint64_t>();
    else throw UsageError("unknown synth spec key: " + key);
  }
  s.validate();
  return s;
}

struct DatasetItem {
  std::size_t id = 0;
  int label = 0;
  std::size_t valid_len = 0;
  std::vector<std::size_t> signal_positions;
  Split split = Split::train;
  Tensor frames;  // [T_max, C, H, W]
};

struct Dataset {
  SynthSpec spec;
  std::vector<DatasetItem> items;

  std::size_t frames() const { return spec.t_max; }
  std::size_t frame_size() const { return spec.channels * spec.height * spec.width; }

  std::vector<std::size_t> split_indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (items[i].split == s) out.push_back(i);
    return out;
  }

  // Stacks items into a [B, T_max, C, H, W] batch.
  FrameSequence batch(const std::vector<std::size_t>& indices) const {
    FrameSequence seq;
    seq.data = Tensor(Shape{indices.size(), spec.t_max, spec.channels, spec.height, spec.width});
    const std::size_t stride = spec.t_max * frame_size();
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const DatasetItem& it = items.at(indices[b]);
      std::copy(it.frames.data().begin(), it.frames.data().end(), seq.data.data().begin() + b * stride);
      seq.valid_len.push_back(it.valid_len);
    }
    return seq;
  }

  std::vector<int> labels(const std::vector<std::size_t>& indices) const {
    std::vector<int> out;
    for (std::size_t i : indices) out.push_back(items.at(i).label);
    return out;
  }
};

// Class-specific clean frame [C, H, W].
inline Tensor signal_pattern(const SynthSpec& spec, int label) {
  Tensor p(Shape{spec.channels, spec.height, spec.width});
  const double K = static_cast<double>(spec.num_classes);
  if (spec.signal_kind == SignalKind::intensity_level) {
    p.fill((label + 1) / K);
    return p;
  }
  const double theta = label * std::numbers::pi / K;
  const double cy = (static_cast<double>(spec.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(spec.width) - 1.0) / 2.0;
  const double half = static_cast<double>(std::max(spec.height, spec.width)) / 2.0;
  for (std::size_t c = 0; c < spec.channels; ++c)
    for (std::size_t y = 0; y < spec.height; ++y)
      for (std::size_t x = 0; x < spec.width; ++x)
        p.at(c, y, x) = ((x - cx) * std::cos(theta) + (y - cy) * std::sin(theta)) / half;
  return p;
}

// Frames are rounded to float32 so the on-disk payload round-trips exactly.
inline Dataset generate(const SynthSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  const RandomStream root = RandomStream::derive(spec.seed, "synth");
  const std::size_t fs = spec.channels * spec.height * spec.width;
  std::vector<Tensor> patterns;
  for (std::size_t y = 0; y < spec.num_classes; ++y) patterns.push_back(signal_pattern(spec, static_cast<int>(y)));

  for (std::size_t i = 0; i < spec.num_items; ++i) {
    RandomStream rs = root.derive(static_cast<std::uint64_t>(i));
    DatasetItem it;
    it.id = i;
    it.label = static_cast<int>(i % spec.num_classes);
    it.valid_len = spec.t_min + static_cast<std::size_t>(rs.next_below(spec.t_max - spec.t_min + 1));
    it.signal_positions = random_indices(it.valid_len, spec.signal_frames, rs);
    it.frames = Tensor(Shape{spec.t_max, spec.channels, spec.height, spec.width});
    for (std::size_t t = 0; t < it.valid_len; ++t)
      for (std::size_t p = 0; p < fs; ++p) it.frames[t * fs + p] = spec.noise_std * rs.next_normal();
    const Tensor& pat = patterns[static_cast<std::size_t>(it.label)];
    for (std::size_t t : it.signal_positions)
      for (std::size_t p = 0; p < fs; ++p) it.frames[t * fs + p] += pat[p];
    for (double& v : it.frames.data()) v = static_cast<double>(static_cast<float>(v));
    ds.items.push_back(std::move(it));
  }

  // 70/15/15 split over a seeded permutation.
  RandomStream split_rs = root.derive("split");
  std::vector<std::size_t> order(spec.num_items);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[split_rs.next_below(i)]);
  const auto n = static_cast<double>(spec.num_items);
  const std::size_t n_train = static_cast<std::size_t>(std::llround(0.70 * n));
  const std::size_t n_val = static_cast<std::size_t>(std::llround(0.15 * n));
  for (std::size_t r = 0; r < order.size(); ++r) {
    ds.items[order[r]].split = r < n_train ? Split::train : (r < n_train + n_val ? Split::val : Split::test);
  }
  return ds;
}

inline constexpr std::string_view kDatasetMagic = "DASDATA1";

inline io::Bytes encode_dataset(const Dataset& ds) {
  nlohmann::json items = nlohmann::json::array();
  io::Bytes payload;
  for (const DatasetItem& it : ds.items) {
    items.push_back({{"id", it.id},
                     {"label", it.label},
                     {"valid_len", it.valid_len},
                     {"signal_positions", it.signal_positions},
                     {"split", to_string(it.split)},
                     {"offset", payload.size()}});
    for (double v : it.frames.data()) io::put_f32(payload, static_cast<float>(v));
  }
  nlohmann::json header = {{"version", 1},
                           {"spec", to_json(ds.spec)},
                           {"frame_shape", {ds.spec.t_max, ds.spec.channels, ds.spec.height, ds.spec.width}},
                           {"items", items}};
  return io::frame_container(kDatasetMagic, header, payload);
}

inline Dataset decode_dataset(const io::Bytes& bytes) {
  const io::Container c = io::open_container(kDatasetMagic, bytes);
  if (c.header.value("version", 0) != 1) throw FormatError("unsupported dataset version");
  Dataset ds;
  ds.spec = synth_spec_from_json(c.header.at("spec"));
  const Shape frame_shape{ds.spec.t_max, ds.spec.channels, ds.spec.height, ds.spec.width};
  const std::size_t per_item = numel(frame_shape);
  const auto& items = c.header.at("items");
  io::expect_payload(c, items.size() * per_item * 4);
  for (const auto& j : items) {
    DatasetItem it;
    it.id = j.at("id").get<std::size_t>();
    it.label = j.at("label").get<int>();
    it.valid_len = j.at("valid_len").get<std::size_t>();
    it.signal_positions = j.at("signal_positions").get<std::vector<std::size_t>>();
    it.split = parse_split(j.at("split").get<std::string>());
    const std::size_t off = j.at("offset").get<std::size_t>();
    if (off + per_item * 4 > c.payload_size) throw FormatError("item offset past end of payload");
    it.frames = Tensor(frame_shape);
    for (std::size_t p = 0; p < per_item; ++p) it.frames[p] = io::get_f32(c.payload + off + 4 * p);
    ds.items.push_back(std::move(it));
  }
  return ds;
}

inline void write_dataset(const Dataset& ds, const std::string& path) { io::write_file(path, encode_dataset(ds)); }

inline Dataset read_dataset(const std::string& path) { return decode_dataset(io::read_file(path)); }

// Classifies from the planted frames only: nearest class template to their average.
inline int oracle_predict(const Dataset& ds, const DatasetItem& it) {
  const std::size_t fs = ds.frame_size();
  std::vector<double> avg(fs, 0.0);
  for (std::size_t t : it.signal_positions)
    for (std::size_t p = 0; p < fs; ++p) avg[p] += it.frames[t * fs + p] / static_cast<double>(it.signal_positions.size());
  int best = 0;
  double best_d = INFINITY;
  for (std::size_t y = 0; y < ds.spec.num_classes; ++y) {
    const Tensor pat = signal_pattern(ds.spec, static_cast<int>(y));
    double d = 0.0;
    for (std::size_t p = 0; p < fs; ++p) d += (avg[p] - pat[p]) * (avg[p] - pat[p]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(y);
    }
  }
  return best;
}

}  // namespace das
