#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "das/tensor.hpp"

namespace das {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Reads `self.grad` and accumulates into each parent that requires a gradient.
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Tensor value;
  Tensor grad;  // empty until backward reaches this node
  std::vector<NodePtr> parents;
  BackwardFn backward;
  bool requires_grad = false;
  std::string op = "leaf";

  // Zero-initialized on first use.
  Tensor& grad_buffer() {
    if (grad.size() != value.size() || grad.shape() != value.shape()) grad = Tensor(value.shape());
    return grad;
  }
};

// Handle to a node in the computation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  const NodePtr& node() const { return node_; }

  // d(root)/d(this) after backward; zeros when no gradient reached this node.
  Tensor grad() const {
    if (node_->grad.shape() == node_->value.shape() && node_->grad.size() == node_->value.size()) return node_->grad;
    return Tensor(node_->value.shape());
  }

 private:
  NodePtr node_;
};

inline Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "constant";
  return Var(std::move(n));
}

// Leaf that collects a gradient.
inline Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->op = "parameter";
  return Var(std::move(n));
}

// Registers a new differentiable operation. Public so callers can add their own primitives.
inline Var make_op(std::string name, Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
  if (!value.all_finite()) throw NumericFault("non-finite value produced by " + name);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = std::move(name);
  for (const Var& p : parents) {
    if (p.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (const Var& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

inline void backward(const Var& root) {
  if (root.size() != 1) throw ShapeError("backward needs a scalar root, got shape " + shape_str(root.shape()));
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
}

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                       " are not broadcast-compatible");
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

// Strides of `in` laid over `out`, zero on broadcast axes.
inline std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t axis_in = in.size() - 1 - k;
    const std::size_t axis_out = out.size() - 1 - k;
    strides[axis_out] = in[axis_in] == 1 ? 0 : stride;
    stride *= in[axis_in];
  }
  return strides;
}

// Calls f(out_index, a_index, b_index) for every element of `out`.
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa, const std::vector<std::size_t>& sb,
                        F&& f) {
  const std::size_t n = numel(out);
  const std::size_t r = out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

template <typename Fwd, typename Bwd>
Var binary_broadcast(const char* name, const Var& a, const Var& b, Fwd fwd, Bwd bwd) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  Tensor out(out_shape);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  } else {
    for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      out[i] = fwd(av[ia], bv[ib]);
    });
  }
  return make_op(name, std::move(out), {a, b}, [sa, sb, bwd](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    Tensor* ga = pa.requires_grad ? &pa.grad_buffer() : nullptr;
    Tensor* gb = pb.requires_grad ? &pb.grad_buffer() : nullptr;
    const auto& g = self.grad;
    for_each_broadcast(self.value.shape(), sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      double da = 0.0;
      double db = 0.0;
      bwd(g[i], pa.value[ia], pb.value[ib], self.value[i], da, db);
      if (ga) (*ga)[ia] += da;
      if (gb) (*gb)[ib] += db;
    });
  });
}

template <typename Fwd, typename Deriv>
Var unary(const char* name, const Var& x, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return make_op(name, std::move(out), {x}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    Tensor& gp = p.grad_buffer();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
  });
}

inline double stable_softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline Var add(const Var& a, const Var& b) {
  return detail::binary_broadcast(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double, double, double& da, double& db) {
        da = g;
        db = g;
      });
}

inline Var sub(const Var& a, const Var& b) {
  return detail::binary_broadcast(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double, double, double& da, double& db) {
        da = g;
        db = -g;
      });
}

inline Var mul(const Var& a, const Var& b) {
  return detail::binary_broadcast(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double x, double y, double, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

inline Var div(const Var& a, const Var& b) {
  return detail::binary_broadcast(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double g, double x, double y, double, double& da, double& db) {
        da = g / y;
        db = -g * x / (y * y);
      });
}

inline Var scale(const Var& x, double c) {
  return detail::unary(
      "scale", x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

inline Var shift(const Var& x, double c) {
  return detail::unary(
      "shift", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

inline Var softplus(const Var& x) {
  return detail::unary("softplus", x, detail::stable_softplus,
                       [](double v, double) { return detail::stable_sigmoid(v); });
}

inline Var sigmoid(const Var& x) {
  return detail::unary("sigmoid", x, detail::stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(const Var& x) {
  return detail::unary(
      "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var exp(const Var& x) {
  return detail::unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Var log(const Var& x) {
  return detail::unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

inline Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_op("reshape", std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& gp = p.grad_buffer();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i];
  });
}

// Same value, no gradient upstream.
inline Var detach(const Var& x) {
  auto n = std::make_shared<Node>();
  n->value = x.value();
  n->op = "detach";
  return Var(std::move(n));
}

// Forward value is `hard`; the incoming gradient passes unchanged to `soft`.
inline Var straight_through(Tensor hard, const Var& soft) {
  if (hard.shape() != soft.shape()) {
    throw ShapeError("straight_through: hard " + shape_str(hard.shape()) + " vs soft " + shape_str(soft.shape()));
  }
  return make_op("straight_through", std::move(hard), {soft}, [](Node& self) {
    Tensor& gp = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i];
  });
}

// lhs [..., n, m] times rhs [m, p] or [..., m, p] with identical leading axes.
inline Var matmul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) {
    throw ShapeError("matmul needs rank >= 2 operands, got " + shape_str(sa) + " and " + shape_str(sb));
  }
  const std::size_t n = sa[sa.size() - 2];
  const std::size_t m = sa[sa.size() - 1];
  const std::size_t p = sb[sb.size() - 1];
  const bool shared_rhs = sb.size() == 2;
  const Shape batch_a(sa.begin(), sa.end() - 2);
  const Shape batch_b(sb.begin(), sb.end() - 2);
  if (sb[sb.size() - 2] != m || (!shared_rhs && batch_a != batch_b)) {
    throw ShapeError("matmul: shapes " + shape_str(sa) + " and " + shape_str(sb) + " do not align");
  }
  const std::size_t batch = numel(batch_a);
  Shape out_shape = batch_a;
  out_shape.push_back(n);
  out_shape.push_back(p);
  Tensor out(out_shape);
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t z = 0; z < batch; ++z) {
    const double* A = av.data().data() + z * n * m;
    const double* B = bv.data().data() + (shared_rhs ? 0 : z * m * p);
    double* C = out.data().data() + z * n * p;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < m; ++l) {
        const double x = A[i * m + l];
        if (x == 0.0) continue;
        for (std::size_t j = 0; j < p; ++j) C[i * p + j] += x * B[l * p + j];
      }
    }
  }
  return make_op("matmul", std::move(out), {a, b}, [batch, n, m, p, shared_rhs](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double* G = self.grad.data().data();
    if (pa.requires_grad) {
      double* GA = pa.grad_buffer().data().data();
      const double* B = pb.value.data().data();
      for (std::size_t z = 0; z < batch; ++z) {
        const double* Bz = B + (shared_rhs ? 0 : z * m * p);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t l = 0; l < m; ++l) {
            double acc = 0.0;
            for (std::size_t j = 0; j < p; ++j) acc += G[z * n * p + i * p + j] * Bz[l * p + j];
            GA[z * n * m + i * m + l] += acc;
          }
        }
      }
    }
    if (pb.requires_grad) {
      double* GB = pb.grad_buffer().data().data();
      const double* A = pa.value.data().data();
      for (std::size_t z = 0; z < batch; ++z) {
        double* GBz = GB + (shared_rhs ? 0 : z * m * p);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t l = 0; l < m; ++l) {
            const double x = A[z * n * m + i * m + l];
            if (x == 0.0) continue;
            for (std::size_t j = 0; j < p; ++j) GBz[l * p + j] += x * G[z * n * p + i * p + j];
          }
        }
      }
    }
  });
}

inline Var sum(const Var& x, std::size_t axis, bool keepdim = false) {
  const AxisView v = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  Tensor out(out_shape);
  const auto& xv = x.value();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t e = 0; e < v.extent; ++e)
      for (std::size_t i = 0; i < v.inner; ++i) out[o * v.inner + i] += xv[(o * v.extent + e) * v.inner + i];
  return make_op("sum", std::move(out), {x}, [v](Node& self) {
    Tensor& gp = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t e = 0; e < v.extent; ++e)
        for (std::size_t i = 0; i < v.inner; ++i) gp[(o * v.extent + e) * v.inner + i] += self.grad[o * v.inner + i];
  });
}

inline Var mean(const Var& x, std::size_t axis, bool keepdim = false) {
  return scale(sum(x, axis, keepdim), 1.0 / static_cast<double>(x.shape().at(axis)));
}

inline Var sum_all(const Var& x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  return make_op("sum_all", Tensor::scalar(acc), {x}, [](Node& self) {
    Tensor& gp = self.parents[0]->grad_buffer();
    const double g = self.grad[0];
    for (double& v : gp.data()) v += g;
  });
}

inline Var mean_all(const Var& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.size())); }

inline Var softmax(const Var& x, std::size_t axis) {
  const AxisView v = axis_view(x.shape(), axis);
  if (v.extent < 1) throw ShapeError("softmax over empty axis of shape " + shape_str(x.shape()));
  Tensor out(x.shape());
  const auto& xv = x.value();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      double mx = xv[base];
      for (std::size_t e = 1; e < v.extent; ++e) mx = std::max(mx, xv[base + e * v.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) {
        const double w = std::exp(xv[base + e * v.inner] - mx);
        out[base + e * v.inner] = w;
        z += w;
      }
      for (std::size_t e = 0; e < v.extent; ++e) out[base + e * v.inner] /= z;
    }
  }
  return make_op("softmax", std::move(out), {x}, [v](Node& self) {
    Tensor& gp = self.parents[0]->grad_buffer();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.extent * v.inner + i;
        double dot = 0.0;
        for (std::size_t e = 0; e < v.extent; ++e) dot += g[base + e * v.inner] * y[base + e * v.inner];
        for (std::size_t e = 0; e < v.extent; ++e) {
          const std::size_t k = base + e * v.inner;
          gp[k] += y[k] * (g[k] - dot);
        }
      }
    }
  });
}

inline Var log_softmax(const Var& x, std::size_t axis) {
  const AxisView v = axis_view(x.shape(), axis);
  if (v.extent < 1) throw ShapeError("log_softmax over empty axis of shape " + shape_str(x.shape()));
  Tensor out(x.shape());
  const auto& xv = x.value();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      double mx = xv[base];
      for (std::size_t e = 1; e < v.extent; ++e) mx = std::max(mx, xv[base + e * v.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) z += std::exp(xv[base + e * v.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t e = 0; e < v.extent; ++e) out[base + e * v.inner] = xv[base + e * v.inner] - lse;
    }
  }
  return make_op("log_softmax", std::move(out), {x}, [v](Node& self) {
    Tensor& gp = self.parents[0]->grad_buffer();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.extent * v.inner + i;
        double gsum = 0.0;
        for (std::size_t e = 0; e < v.extent; ++e) gsum += g[base + e * v.inner];
        for (std::size_t e = 0; e < v.extent; ++e) {
          const std::size_t k = base + e * v.inner;
          gp[k] += g[k] - std::exp(y[k]) * gsum;
        }
      }
    }
  });
}

inline Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Shape out_shape = parts.front().shape();
  if (axis >= out_shape.size()) throw ShapeError("concat axis out of range for " + shape_str(out_shape));
  std::size_t total = 0;
  for (const Var& p : parts) {
    Shape s = p.shape();
    if (s.size() != out_shape.size()) {
      throw ShapeError("concat: shapes " + shape_str(out_shape) + " and " + shape_str(s) + " differ in rank");
    }
    total += s[axis];
    s[axis] = out_shape[axis];
    if (s != out_shape) {
      throw ShapeError("concat: shapes " + shape_str(out_shape) + " and " + shape_str(p.shape()) +
                       " differ off the concat axis");
    }
  }
  out_shape[axis] = total;
  const AxisView ov = axis_view(out_shape, axis);
  Tensor out(out_shape);
  std::vector<std::size_t> extents;
  std::size_t start = 0;
  for (const Var& p : parts) {
    const std::size_t ext = p.shape()[axis];
    extents.push_back(ext);
    for (std::size_t o = 0; o < ov.outer; ++o)
      for (std::size_t e = 0; e < ext; ++e)
        for (std::size_t i = 0; i < ov.inner; ++i)
          out[(o * total + start + e) * ov.inner + i] = p.value()[(o * ext + e) * ov.inner + i];
    start += ext;
  }
  return make_op("concat", std::move(out), parts, [ov, total, extents](Node& self) {
    std::size_t start = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const std::size_t ext = extents[k];
      Node& p = *self.parents[k];
      if (p.requires_grad) {
        Tensor& gp = p.grad_buffer();
        for (std::size_t o = 0; o < ov.outer; ++o)
          for (std::size_t e = 0; e < ext; ++e)
            for (std::size_t i = 0; i < ov.inner; ++i)
              gp[(o * ext + e) * ov.inner + i] += self.grad[(o * total + start + e) * ov.inner + i];
      }
      start += ext;
    }
  });
}

}  // namespace das
