#pragma once

#include <functional>
#include <string>
#include <vector>

#include "das/classifier.hpp"
#include "das/grad_check.hpp"
#include "das/sampler.hpp"

namespace das {

struct GradCheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 1e-4;

  bool passed() const { return max_error < tolerance; }
};

namespace detail {

inline Tensor random_tensor(RandomStream& rs, const Shape& shape, double lo, double hi) {
  Tensor t(shape);
  for (double& v : t.data()) v = lo + (hi - lo) * rs.next_uniform();
  return t;
}

// Reduces any output to a scalar with fixed random weights so every output coordinate matters.
inline Var weighted_total(const Var& y, const Tensor& weights) { return sum_all(mul(y, constant(weights))); }

struct PrimitiveCase {
  std::string name;
  Shape input;
  double lo = -2.0;
  double hi = 2.0;
  // Builds the scalar function for one random draw of its fixed operands.
  std::function<ScalarFn(RandomStream&)> make;
};

inline std::vector<PrimitiveCase> primitive_cases() {
  auto unary_case = [](std::string name, Shape in, Shape out, std::function<Var(const Var&)> op, double lo = -2.0,
                       double hi = 2.0) {
    return PrimitiveCase{name, in, lo, hi, [op, out](RandomStream& rs) -> ScalarFn {
                           const Tensor w = random_tensor(rs, out, -1.0, 1.0);
                           return [op, w](const Var& x) { return weighted_total(op(x), w); };
                         }};
  };
  // Differentiates with respect to the left operand (`lhs_free`) or the right one.
  auto binary_case = [](std::string name, Shape free, Shape other, Shape out, bool lhs_free,
                        std::function<Var(const Var&, const Var&)> op, double lo = -2.0, double hi = 2.0) {
    return PrimitiveCase{name, free, lo, hi, [op, other, out, lhs_free](RandomStream& rs) -> ScalarFn {
                           const Tensor o = random_tensor(rs, other, 0.5, 2.0);
                           const Tensor w = random_tensor(rs, out, -1.0, 1.0);
                           return [op, o, w, lhs_free](const Var& x) {
                             return weighted_total(lhs_free ? op(x, constant(o)) : op(constant(o), x), w);
                           };
                         }};
  };
  using S = Shape;
  std::vector<PrimitiveCase> cases;
  cases.push_back(binary_case("add", S{2, 3}, S{3}, S{2, 3}, true, add));
  cases.push_back(binary_case("add(broadcast rhs)", S{3}, S{2, 3}, S{2, 3}, true, add));
  cases.push_back(binary_case("sub", S{2, 3}, S{2, 1}, S{2, 3}, false, sub));
  cases.push_back(binary_case("mul", S{2, 3}, S{2, 3}, S{2, 3}, true, mul));
  cases.push_back(binary_case("mul(broadcast)", S{2, 1, 3}, S{4, 1}, S{2, 4, 3}, true, mul));
  cases.push_back(binary_case("div(numerator)", S{2, 3}, S{2, 3}, S{2, 3}, true, div));
  cases.push_back(binary_case("div(denominator)", S{2, 3}, S{3}, S{2, 3}, false, div, 0.5, 2.0));
  cases.push_back(binary_case("matmul(lhs)", S{2, 3, 4}, S{4, 2}, S{2, 3, 2}, true, matmul));
  cases.push_back(binary_case("matmul(rhs)", S{4, 2}, S{2, 3, 4}, S{2, 3, 2}, false, matmul));
  cases.push_back(binary_case("matmul(batched rhs)", S{2, 4, 2}, S{2, 3, 4}, S{2, 3, 2}, false, matmul));
  cases.push_back(unary_case("sum(axis)", S{2, 3, 4}, S{2, 4}, [](const Var& x) { return sum(x, 1); }));
  cases.push_back(unary_case("mean(axis)", S{2, 3, 4}, S{2, 3, 1}, [](const Var& x) { return mean(x, 2, true); }));
  cases.push_back(unary_case("softmax", S{2, 5}, S{2, 5}, [](const Var& x) { return softmax(x, 1); }));
  cases.push_back(unary_case("softmax(inner axis)", S{3, 4, 2}, S{3, 4, 2}, [](const Var& x) { return softmax(x, 1); }));
  cases.push_back(unary_case("log_softmax", S{2, 5}, S{2, 5}, [](const Var& x) { return log_softmax(x, 1); }));
  cases.push_back(unary_case("softplus", S{6}, S{6}, [](const Var& x) { return softplus(x); }, -4.0, 4.0));
  cases.push_back(unary_case("sigmoid", S{6}, S{6}, [](const Var& x) { return sigmoid(x); }, -4.0, 4.0));
  cases.push_back(unary_case("tanh", S{6}, S{6}, [](const Var& x) { return tanh(x); }));
  cases.push_back(unary_case("exp", S{6}, S{6}, [](const Var& x) { return exp(x); }));
  cases.push_back(unary_case("log", S{6}, S{6}, [](const Var& x) { return log(x); }, 0.2, 3.0));
  cases.push_back(unary_case("scale", S{2, 3}, S{2, 3}, [](const Var& x) { return scale(x, -1.7); }));
  cases.push_back(unary_case("shift", S{2, 3}, S{2, 3}, [](const Var& x) { return shift(x, 0.3); }));
  cases.push_back(unary_case("reshape", S{2, 6}, S{3, 4}, [](const Var& x) { return reshape(x, Shape{3, 4}); }));
  cases.push_back(unary_case("concat", S{2, 3}, S{2, 5},
                             [](const Var& x) { return concat({x, constant(Tensor(Shape{2, 2}, 0.5))}, 1); }));
  cases.push_back(unary_case("concat(axis 0, fan-out)", S{2, 3}, S{4, 3},
                             [](const Var& x) { return concat({x, mul(x, x)}, 0); }));
  cases.push_back(unary_case("sum_all", S{2, 3}, S{}, [](const Var& x) { return sum_all(x); }));
  cases.push_back(unary_case("mean_all", S{2, 3}, S{}, [](const Var& x) { return mean_all(x); }));
  return cases;
}

}  // namespace detail

// Small sampler/classifier shapes used by the composite checks.
struct GradSuiteShapes {
  std::size_t batch = 2;
  std::size_t frames = 6;
  std::size_t k = 3;
  std::size_t height = 6;
  std::size_t width = 6;
  SamplerConfig sampler{kFeatureDim, 2, 3, 4, 4, 1.0};
  ClassifierConfig classifier{1, 6, 5, 3};
};

inline FrameSequence random_frames(RandomStream& rs, const GradSuiteShapes& s) {
  FrameSequence seq;
  seq.data = detail::random_tensor(rs, Shape{s.batch, s.frames, 1, s.height, s.width}, 0.0, 1.0);
  seq.valid_len.assign(s.batch, s.frames);
  return seq;
}

// Composite modules at one random draw: sampler logits, temperature, classifier,
// straight-through consistency and the full sampler + classifier soft path.
inline std::vector<GradCheckResult> composite_gradient_checks(std::uint64_t seed, double step = 1e-5) {
  GradSuiteShapes shapes;
  RandomStream rs = RandomStream::derive(seed, "grad-suite/composite");
  const FrameSequence seq = random_frames(rs, shapes);
  const FeatureTensor features = build_features(seq);
  const std::vector<int> labels{0, 2};

  ParameterStore store;
  init_sampler_params(store, shapes.sampler, rs);
  init_classifier_params(store, shapes.classifier, rs);
  // Non-zero biases so every parameter is exercised.
  for (auto& [_, e] : store) {
    for (double& v : e.value.data()) v += 0.1 * (2.0 * rs.next_uniform() - 1.0);
  }
  const Shape logit_shape{shapes.batch, shapes.k, shapes.frames};
  const Tensor noise = sample_gumbel(rs, logit_shape);
  const Tensor w_logits = detail::random_tensor(rs, logit_shape, -1.0, 1.0);
  const Tensor w_tau = detail::random_tensor(rs, Shape{shapes.batch}, -1.0, 1.0);
  const Tensor w_frames = detail::random_tensor(rs, Shape{shapes.batch, shapes.k, 1, shapes.height, shapes.width}, -1.0, 1.0);
  const Tensor picked = detail::random_tensor(rs, Shape{shapes.batch, shapes.k, 1, shapes.height, shapes.width}, 0.0, 1.0);

  std::vector<std::string> sampler_logit_names{"sampler.base.w", "sampler.base.b"};
  for (std::size_t h = 0; h < shapes.sampler.heads; ++h)
    for (const char* suffix : {".w1", ".b1", ".w2", ".b2"}) sampler_logit_names.push_back(head_prefix(h) + suffix);
  const std::vector<std::string> temp_names{"sampler.temp.w1", "sampler.temp.b1", "sampler.temp.w2", "sampler.temp.b2"};
  const std::vector<std::string> clf_names{"clf.embed.w", "clf.embed.b", "clf.agg.wa", "clf.agg.v",
                                           "clf.mlp.w1",  "clf.mlp.b1",  "clf.mlp.w2", "clf.mlp.b2"};

  std::vector<GradCheckResult> out;
  const auto& cfg = shapes.sampler;

  out.push_back({"sampler.logits",
                 grad_check_store(
                     [&](ParamBinding& p) {
                       const Var f = constant(features.data);
                       return detail::weighted_total(combine_heads(base_attention(f, p), [&] {
                                                       std::vector<Var> s;
                                                       for (std::size_t h = 0; h < cfg.heads; ++h)
                                                         s.push_back(head_scales(f, p, cfg, h));
                                                       return s;
                                                     }()),
                                                     w_logits);
                     },
                     store, step, sampler_logit_names),
                 1e-4});

  out.push_back({"sampler.temperature",
                 grad_check_store(
                     [&](ParamBinding& p) {
                       return detail::weighted_total(adaptive_temperature(constant(features.data), p, cfg), w_tau);
                     },
                     store, step, temp_names),
                 1e-4});

  out.push_back({"classifier",
                 grad_check_store(
                     [&](ParamBinding& p) {
                       return cross_entropy(classify(attention_aggregate(frame_embed(constant(picked), p), p), p), labels);
                     },
                     store, step, clf_names),
                 1e-4});

  // Straight-through: with a downstream scalar linear in P, the STE gradient w.r.t. the
  // sampler parameters must equal finite differences of the same scalar through P_soft.
  {
    store.zero_grad();
    ParamBinding p(store);
    const SamplerLogits l = sampler_logits(constant(features.data), p, cfg);
    const SamplingMatrix m = gumbel_softmax_with_noise(l.logits, l.temperature, noise);
    Var y = detail::weighted_total(apply_sampling(m.weights, seq), w_frames);
    backward(y);
    p.accumulate_grads();
    double worst = 0.0;
    for (const auto& name : [&] {
           auto all = sampler_logit_names;
           all.insert(all.end(), temp_names.begin(), temp_names.end());
           return all;
         }()) {
      ParamEntry& e = store.at(name);
      const Tensor analytic = e.grad;
      for (std::size_t i = 0; i < e.value.size(); ++i) {
        const double orig = e.value[i];
        auto soft_value = [&] {
          ParamBinding q(store);
          const SamplerLogits lq = sampler_logits(constant(features.data), q, cfg);
          const SamplingMatrix mq = gumbel_softmax_with_noise(lq.logits, lq.temperature, noise);
          return detail::weighted_total(apply_sampling(mq.relaxed, seq), w_frames).value()[0];
        };
        e.value[i] = orig + step;
        const double up = soft_value();
        e.value[i] = orig - step;
        const double down = soft_value();
        e.value[i] = orig;
        worst = std::max(worst, relative_gradient_error(analytic[i], (up - down) / (2.0 * step)));
      }
    }
    store.zero_grad();
    out.push_back({"straight-through", worst, 1e-4});
  }

  out.push_back({"end-to-end (soft path)",
                 grad_check_store(
                     [&](ParamBinding& p) {
                       const SamplerLogits l = sampler_logits(constant(features.data), p, cfg);
                       const SamplingMatrix m = gumbel_softmax_with_noise(l.logits, l.temperature, noise);
                       Var frames = apply_sampling(m.relaxed, seq);
                       return cross_entropy(classify(attention_aggregate(frame_embed(frames, p), p), p), labels);
                     },
                     store, step),
                 1e-3});
  return out;
}

// Every primitive at `points` random draws plus the composite checks at `composite_points` seeds.
inline std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed, std::size_t points = 100,
                                                       std::size_t composite_points = 100, double step = 1e-5) {
  std::vector<GradCheckResult> results;
  RandomStream rs = RandomStream::derive(seed, "grad-suite/primitives");
  for (const auto& c : detail::primitive_cases()) {
    double worst = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
      const Tensor point = detail::random_tensor(rs, c.input, c.lo, c.hi);
      worst = std::max(worst, grad_check(c.make(rs), point, step));
    }
    results.push_back({c.name, worst, 1e-4});
  }
  std::vector<GradCheckResult> composite;
  for (std::size_t i = 0; i < composite_points; ++i) {
    const auto r = composite_gradient_checks(seed * 1000003ULL + i, step);
    if (composite.empty()) {
      composite = r;
    } else {
      for (std::size_t k = 0; k < r.size(); ++k) composite[k].max_error = std::max(composite[k].max_error, r[k].max_error);
    }
  }
  results.insert(results.end(), composite.begin(), composite.end());
  return results;
}

}  // namespace das
