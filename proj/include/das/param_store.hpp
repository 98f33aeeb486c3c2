#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "das/autodiff.hpp"
#include "das/binary_io.hpp"
#include "das/random.hpp"

namespace das {

struct ParamEntry {
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::uint64_t step = 0;
  bool trainable = true;
};

// Named trainable tensors with their gradient buffers and Adam state, kept in name order.
class ParameterStore {
 public:
  ParamEntry& add(const std::string& name, Tensor init, bool trainable = true) {
    if (entries_.count(name)) throw UsageError("duplicate parameter name: " + name);
    const Shape s = init.shape();
    ParamEntry e{std::move(init), Tensor(s), Tensor(s), Tensor(s), 0, trainable};
    return entries_.emplace(name, std::move(e)).first->second;
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  ParamEntry& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UsageError("unknown parameter: " + name);
    return it->second;
  }
  const ParamEntry& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UsageError("unknown parameter: " + name);
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& [_, e] : entries_) e.grad.fill(0.0);
  }

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    auto ib = b.entries_.begin();
    for (const auto& [name, e] : a.entries_) {
      const auto& [nb, f] = *ib++;
      if (name != nb || e.step != f.step || e.trainable != f.trainable) return false;
      if (!(e.value == f.value && e.grad == f.grad && e.adam_m == f.adam_m && e.adam_v == f.adam_v)) return false;
    }
    return true;
  }

 private:
  std::map<std::string, ParamEntry> entries_;
};

// Glorot-uniform matrix [fan_in, fan_out].
inline Tensor glorot_uniform(RandomStream& stream, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(Shape{fan_in, fan_out});
  for (double& v : t.data()) v = limit * (2.0 * stream.next_uniform() - 1.0);
  return t;
}

// Exposes store entries as graph leaves for one forward/backward pass.
class ParamBinding {
 public:
  explicit ParamBinding(ParameterStore& store) : store_(&store) {}

  Var operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    const ParamEntry& e = store_->at(name);
    Var v = e.trainable ? parameter(e.value) : constant(e.value);
    bound_.emplace(name, v);
    return v;
  }

  // Adds the leaf gradients from the last backward pass into the store's gradient buffers.
  void accumulate_grads() {
    for (auto& [name, v] : bound_) {
      if (!v.requires_grad()) continue;
      store_->at(name).grad += v.grad();
    }
  }

  ParameterStore& store() { return *store_; }

 private:
  ParameterStore* store_;
  std::map<std::string, Var> bound_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// In-place bias-corrected Adam update over every trainable entry; zeroes the gradients afterwards.
inline void adam_step(ParameterStore& params, double lr, double beta1, double beta2, double eps) {
  for (const auto& [name, e] : params) {
    if (e.trainable && !e.grad.all_finite()) throw NumericFault("non-finite gradient in parameter " + name);
  }
  for (auto& [name, e] : params) {
    if (!e.trainable) continue;
    ++e.step;
    const double t = static_cast<double>(e.step);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i];
      e.adam_m[i] = beta1 * e.adam_m[i] + (1.0 - beta1) * g;
      e.adam_v[i] = beta2 * e.adam_v[i] + (1.0 - beta2) * g * g;
      const double m_hat = e.adam_m[i] / c1;
      const double v_hat = e.adam_v[i] / c2;
      e.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
    e.grad.fill(0.0);
  }
}

inline void adam_step(ParameterStore& params, const AdamConfig& cfg) {
  adam_step(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
}

inline constexpr std::string_view kCheckpointMagic = "DASCKPT1";

// Checkpoint payload per entry: value, grad, adam_m, adam_v as little-endian doubles.
inline io::Bytes encode_checkpoint(const ParameterStore& store, const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json entries = nlohmann::json::array();
  io::Bytes payload;
  for (const auto& [name, e] : store) {
    entries.push_back({{"name", name},
                       {"shape", e.value.shape()},
                       {"offset", payload.size()},
                       {"step", e.step},
                       {"trainable", e.trainable}});
    for (const Tensor* t : {&e.value, &e.grad, &e.adam_m, &e.adam_v}) {
      for (double v : t->data()) io::put_f64(payload, v);
    }
  }
  nlohmann::json header = {{"version", 1}, {"entries", entries}, {"meta", meta}};
  return io::frame_container(kCheckpointMagic, header, payload);
}

struct Checkpoint {
  ParameterStore store;
  nlohmann::json meta;
};

inline Checkpoint decode_checkpoint(const io::Bytes& bytes) {
  const io::Container c = io::open_container(kCheckpointMagic, bytes);
  if (c.header.value("version", 0) != 1) throw FormatError("unsupported checkpoint version");
  Checkpoint ck;
  ck.meta = c.header.value("meta", nlohmann::json::object());
  std::size_t expected = 0;
  for (const auto& entry : c.header.at("entries")) {
    const Shape shape = entry.at("shape").get<Shape>();
    expected = std::max<std::size_t>(expected, entry.at("offset").get<std::size_t>() + 4 * 8 * numel(shape));
  }
  io::expect_payload(c, expected);
  for (const auto& entry : c.header.at("entries")) {
    const Shape shape = entry.at("shape").get<Shape>();
    const std::size_t n = numel(shape);
    std::size_t off = entry.at("offset").get<std::size_t>();
    ParamEntry& e = ck.store.add(entry.at("name").get<std::string>(), Tensor(shape), entry.at("trainable").get<bool>());
    e.step = entry.at("step").get<std::uint64_t>();
    for (Tensor* t : {&e.value, &e.grad, &e.adam_m, &e.adam_v}) {
      for (std::size_t i = 0; i < n; ++i, off += 8) (*t)[i] = io::get_f64(c.payload + off);
    }
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const ParameterStore& store,
                            const nlohmann::json& meta = nlohmann::json::object()) {
  io::write_file(path, encode_checkpoint(store, meta));
}

inline Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace das
