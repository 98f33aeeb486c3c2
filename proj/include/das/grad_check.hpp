#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "das/autodiff.hpp"
#include "das/param_store.hpp"

namespace das {

using ScalarFn = std::function<Var(const Var&)>;
using StoreLossFn = std::function<Var(ParamBinding&)>;

inline double relative_gradient_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

namespace detail {

inline double checked_scalar(const Var& y) {
  if (y.size() != 1) throw ShapeError("grad_check needs a scalar function, got shape " + shape_str(y.shape()));
  const double v = y.value()[0];
  if (!std::isfinite(v)) throw NumericFault("grad_check: non-finite function value");
  return v;
}

}  // namespace detail

// Max over coordinates of |analytic - central difference| / max(1, |central difference|).
inline double grad_check(const ScalarFn& fn, const Tensor& point, double step = 1e-5) {
  if (!(step > 0.0)) throw UsageError("grad_check step must be positive");
  Var x = parameter(point);
  Var y = fn(x);
  detail::checked_scalar(y);
  backward(y);
  const Tensor analytic = x.grad();

  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = detail::checked_scalar(fn(constant(probe)));
    probe[i] = point[i] - step;
    const double down = detail::checked_scalar(fn(constant(probe)));
    probe[i] = point[i];
    worst = std::max(worst, relative_gradient_error(analytic[i], (up - down) / (2.0 * step)));
  }
  return worst;
}

// Same check over every trainable value in `store` (or only `names`). Leaves values and grads unchanged.
inline double grad_check_store(const StoreLossFn& fn, ParameterStore& store, double step = 1e-5,
                               const std::vector<std::string>& names = {}) {
  std::vector<Tensor> saved_grads;
  for (auto& [_, e] : store) saved_grads.push_back(e.grad);
  store.zero_grad();

  ParamBinding binding(store);
  Var y = fn(binding);
  detail::checked_scalar(y);
  backward(y);
  binding.accumulate_grads();

  double worst = 0.0;
  for (auto& [name, e] : store) {
    if (!e.trainable) continue;
    if (!names.empty() && std::find(names.begin(), names.end(), name) == names.end()) continue;
    const Tensor analytic = e.grad;
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double orig = e.value[i];
      e.value[i] = orig + step;
      ParamBinding up_binding(store);
      const double up = detail::checked_scalar(fn(up_binding));
      e.value[i] = orig - step;
      ParamBinding down_binding(store);
      const double down = detail::checked_scalar(fn(down_binding));
      e.value[i] = orig;
      worst = std::max(worst, relative_gradient_error(analytic[i], (up - down) / (2.0 * step)));
    }
  }

  std::size_t k = 0;
  for (auto& [_, e] : store) e.grad = saved_grads[k++];
  return worst;
}

}  // namespace das
