// Copyright 2026 The advsig Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef ADVSIG_TENSOR_HPP
#define ADVSIG_TENSOR_HPP

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "advsig/common.hpp"

namespace advsig {

// Reverse-mode autodiff over dense double tensors. Graphs are built per
// forward pass; nodes whose inputs do not require gradients record no
// backward closure, so eval-mode inference carries no tape overhead.

struct TensorImpl {
  std::vector<int> shape;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;

  std::size_t numel() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    auto impl = std::make_shared<TensorImpl>();
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    impl->shape = std::move(shape);
    impl->value.assign(n, 0.0);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  static Tensor from(std::vector<Scalar> data, std::vector<int> shape, bool requires_grad = false) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    if (n != data.size()) throw UsageError("Tensor::from: shape/data mismatch");
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->value = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  static Tensor scalar(Scalar v) { return from({v}, {1}); }

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const { return impl_->shape; }
  int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return impl_->numel(); }
  std::vector<Scalar>& data() { return impl_->value; }
  const std::vector<Scalar>& data() const { return impl_->value; }
  std::vector<Scalar>& grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  const std::vector<Scalar>& grad() const { return impl_->grad; }
  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }
  void zero_grad() {
    impl_->grad.assign(impl_->value.size(), 0.0);
  }
  Scalar item() const {
    if (numel() != 1) throw UsageError("Tensor::item on non-scalar");
    return impl_->value[0];
  }

  // Runs reverse-mode accumulation from this scalar node.
  void backward() const {
    if (numel() != 1) throw UsageError("backward() requires a scalar tensor");
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> seen;
    topo(impl_.get(), seen, order);
    impl_->ensure_grad();
    impl_->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      TensorImpl* node = *it;
      if (node->backward_fn) node->backward_fn(*node);
    }
  }

  std::shared_ptr<TensorImpl>& impl() { return impl_; }
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  static void topo(TensorImpl* root, std::unordered_set<TensorImpl*>& seen, std::vector<TensorImpl*>& order) {
    // Iterative post-order DFS; graphs can be thousands of nodes deep.
    struct Frame {
      TensorImpl* node;
      std::size_t next_child;
    };
    std::vector<Frame> stack;
    if (seen.insert(root).second) stack.push_back({root, 0});
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_child < f.node->parents.size()) {
        TensorImpl* child = f.node->parents[f.next_child++].get();
        if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
      } else {
        order.push_back(f.node);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<TensorImpl> impl_;
};

namespace detail {

inline Tensor make_result(std::vector<int> shape, std::vector<Scalar> value,
                          std::vector<Tensor> parents, std::function<void(TensorImpl&)> backward_fn) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(value);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  impl->requires_grad = rg;
  if (rg) {
    impl->parents.reserve(parents.size());
    for (auto& p : parents) impl->parents.push_back(p.impl());
    impl->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(impl));
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) throw UsageError(std::string(op) + ": shape mismatch");
}

inline void accum(TensorImpl& parent, std::size_t i, Scalar v) {
  parent.grad[i] += v;
}

}  // namespace detail

// --------------------------- elementwise binary ---------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    for (int side = 0; side < 2; ++side) {
      auto& p = *self.parents[static_cast<std::size_t>(side)];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
    }
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
    }
  });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "div");
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] / b.data()[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] / pb.value[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pb.grad[i] -= self.grad[i] * pa.value[i] / (pb.value[i] * pb.value[i]);
    }
  });
}

// ------------------------------ scalar ops --------------------------------

inline Tensor add_scalar(const Tensor& a, Scalar s) {
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + s;
  return detail::make_result(a.shape(), std::move(out), {a}, [](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

inline Tensor mul_scalar(const Tensor& a, Scalar s) {
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
  return detail::make_result(a.shape(), std::move(out), {a}, [s](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * s;
  });
}

// ------------------------------- unary ops --------------------------------

namespace detail {
template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd_from_xy) {
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i]);
  return make_result(a.shape(), std::move(out), {a}, [bwd_from_xy](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += self.grad[i] * bwd_from_xy(p.value[i], self.value[i]);
  });
}
}  // namespace detail

inline Tensor neg(const Tensor& a) {
  return detail::unary_op(a, [](Scalar x) { return -x; }, [](Scalar, Scalar) { return -1.0; });
}
inline Tensor relu(const Tensor& a) {
  return detail::unary_op(a, [](Scalar x) { return x > 0 ? x : 0; }, [](Scalar x, Scalar) { return x > 0 ? 1.0 : 0.0; });
}
inline Tensor tanh_t(const Tensor& a) {
  return detail::unary_op(a, [](Scalar x) { return std::tanh(x); }, [](Scalar, Scalar y) { return 1.0 - y * y; });
}
inline Tensor sigmoid_t(const Tensor& a) {
  return detail::unary_op(a, [](Scalar x) { return 1.0 / (1.0 + std::exp(-x)); },
                          [](Scalar, Scalar y) { return y * (1.0 - y); });
}
inline Tensor log_t(const Tensor& a) {
  return detail::unary_op(a, [](Scalar x) { return std::log(x); }, [](Scalar x, Scalar) { return 1.0 / x; });
}
inline Tensor sqrt_t(const Tensor& a) {
  return detail::unary_op(a, [](Scalar x) { return std::sqrt(x); },
                          [](Scalar, Scalar y) { return 0.5 / (y == 0.0 ? 1e-300 : y); });
}
inline Tensor abs_t(const Tensor& a) {
  return detail::unary_op(a, [](Scalar x) { return std::abs(x); },
                          [](Scalar x, Scalar) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}
inline Tensor square(const Tensor& a) {
  return detail::unary_op(a, [](Scalar x) { return x * x; }, [](Scalar x, Scalar) { return 2.0 * x; });
}
// max(x, c) with zero subgradient at the boundary.
inline Tensor clamp_min_t(const Tensor& a, Scalar c) {
  return detail::unary_op(a, [c](Scalar x) { return x > c ? x : c; },
                          [c](Scalar x, Scalar) { return x > c ? 1.0 : 0.0; });
}
// Smooth rectifier log(1+exp(beta*x))/beta; keeps input-gradient checks free
// of kink noise at finite-difference step sizes.
inline Tensor softplus_t(const Tensor& a, Scalar beta) {
  return detail::unary_op(
      a,
      [beta](Scalar x) { return std::max(x, 0.0) + std::log1p(std::exp(-beta * std::abs(x))) / beta; },
      [beta](Scalar x, Scalar) { return 1.0 / (1.0 + std::exp(-beta * x)); });
}

// ------------------------------ reductions --------------------------------

inline Tensor sum_all(const Tensor& a) {
  Scalar s = 0;
  for (Scalar v : a.data()) s += v;
  return detail::make_result({1}, {s}, {a}, [](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[0];
  });
}

inline Tensor mean_all(const Tensor& a) {
  Scalar s = 0;
  for (Scalar v : a.data()) s += v;
  const Scalar inv = 1.0 / static_cast<Scalar>(a.numel());
  return detail::make_result({1}, {s * inv}, {a}, [inv](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[0] * inv;
  });
}

namespace detail {
// Channel ops treat dim 0 as the channel axis and flatten the rest.
inline std::pair<int, std::size_t> channel_split(const Tensor& x) {
  if (x.shape().empty()) throw UsageError("channel op on scalar");
  int c = x.shape()[0];
  std::size_t inner = x.numel() / static_cast<std::size_t>(c);
  return {c, inner};
}
}  // namespace detail

inline Tensor channel_sum(const Tensor& x) {
  auto [c, inner] = detail::channel_split(x);
  std::vector<Scalar> out(static_cast<std::size_t>(c), 0.0);
  for (int ch = 0; ch < c; ++ch) {
    Scalar s = 0;
    const Scalar* px = x.data().data() + static_cast<std::size_t>(ch) * inner;
    for (std::size_t i = 0; i < inner; ++i) s += px[i];
    out[static_cast<std::size_t>(ch)] = s;
  }
  return detail::make_result({c}, std::move(out), {x}, [inner = inner](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t ch = 0; ch < self.value.size(); ++ch)
      for (std::size_t i = 0; i < inner; ++i) p.grad[ch * inner + i] += self.grad[ch];
  });
}

inline Tensor channel_mean(const Tensor& x) {
  auto [c, inner] = detail::channel_split(x);
  return mul_scalar(channel_sum(x), 1.0 / static_cast<Scalar>(inner));
}

inline Tensor mul_channels(const Tensor& x, const Tensor& v) {
  auto [c, inner] = detail::channel_split(x);
  if (v.numel() != static_cast<std::size_t>(c)) throw UsageError("mul_channels: vector size mismatch");
  std::vector<Scalar> out(x.numel());
  for (int ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < inner; ++i)
      out[static_cast<std::size_t>(ch) * inner + i] = x.data()[static_cast<std::size_t>(ch) * inner + i] * v.data()[static_cast<std::size_t>(ch)];
  return detail::make_result(x.shape(), std::move(out), {x, v}, [inner = inner](TensorImpl& self) {
    auto& px = *self.parents[0];
    auto& pv = *self.parents[1];
    std::size_t c = pv.value.size();
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < inner; ++i) px.grad[ch * inner + i] += self.grad[ch * inner + i] * pv.value[ch];
    }
    if (pv.requires_grad) {
      pv.ensure_grad();
      for (std::size_t ch = 0; ch < c; ++ch) {
        Scalar s = 0;
        for (std::size_t i = 0; i < inner; ++i) s += self.grad[ch * inner + i] * px.value[ch * inner + i];
        pv.grad[ch] += s;
      }
    }
  });
}

inline Tensor add_channels(const Tensor& x, const Tensor& v) {
  auto [c, inner] = detail::channel_split(x);
  if (v.numel() != static_cast<std::size_t>(c)) throw UsageError("add_channels: vector size mismatch");
  std::vector<Scalar> out(x.numel());
  for (int ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < inner; ++i)
      out[static_cast<std::size_t>(ch) * inner + i] = x.data()[static_cast<std::size_t>(ch) * inner + i] + v.data()[static_cast<std::size_t>(ch)];
  return detail::make_result(x.shape(), std::move(out), {x, v}, [inner = inner](TensorImpl& self) {
    auto& px = *self.parents[0];
    auto& pv = *self.parents[1];
    std::size_t c = pv.value.size();
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
    }
    if (pv.requires_grad) {
      pv.ensure_grad();
      for (std::size_t ch = 0; ch < c; ++ch) {
        Scalar s = 0;
        for (std::size_t i = 0; i < inner; ++i) s += self.grad[ch * inner + i];
        pv.grad[ch] += s;
      }
    }
  });
}

inline Tensor sub_channels(const Tensor& x, const Tensor& v) { return add_channels(x, neg(v)); }

// Mean over channels and trailing axis of a [C,F,T] tensor, per frequency bin.
inline Tensor freq_mean(const Tensor& x) {
  if (x.shape().size() != 3) throw UsageError("freq_mean expects [C,F,T]");
  const int c = x.dim(0), f = x.dim(1), t = x.dim(2);
  std::vector<Scalar> out(static_cast<std::size_t>(f), 0.0);
  for (int ci = 0; ci < c; ++ci)
    for (int fi = 0; fi < f; ++fi)
      for (int ti = 0; ti < t; ++ti)
        out[static_cast<std::size_t>(fi)] += x.data()[(static_cast<std::size_t>(ci) * f + fi) * t + ti];
  const Scalar inv = 1.0 / static_cast<Scalar>(c * t);
  for (Scalar& v : out) v *= inv;
  return detail::make_result({f}, std::move(out), {x}, [c, f, t, inv](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int ci = 0; ci < c; ++ci)
      for (int fi = 0; fi < f; ++fi)
        for (int ti = 0; ti < t; ++ti)
          p.grad[(static_cast<std::size_t>(ci) * f + fi) * t + ti] += self.grad[static_cast<std::size_t>(fi)] * inv;
  });
}

// Scales a [C,F,T] tensor by a per-frequency vector [F].
inline Tensor mul_freq(const Tensor& x, const Tensor& v) {
  if (x.shape().size() != 3) throw UsageError("mul_freq expects [C,F,T]");
  const int c = x.dim(0), f = x.dim(1), t = x.dim(2);
  if (v.numel() != static_cast<std::size_t>(f)) throw UsageError("mul_freq: vector size mismatch");
  std::vector<Scalar> out(x.numel());
  for (int ci = 0; ci < c; ++ci)
    for (int fi = 0; fi < f; ++fi)
      for (int ti = 0; ti < t; ++ti) {
        std::size_t idx = (static_cast<std::size_t>(ci) * f + fi) * t + ti;
        out[idx] = x.data()[idx] * v.data()[static_cast<std::size_t>(fi)];
      }
  return detail::make_result(x.shape(), std::move(out), {x, v}, [c, f, t](TensorImpl& self) {
    auto& px = *self.parents[0];
    auto& pv = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (int ci = 0; ci < c; ++ci)
        for (int fi = 0; fi < f; ++fi)
          for (int ti = 0; ti < t; ++ti) {
            std::size_t idx = (static_cast<std::size_t>(ci) * f + fi) * t + ti;
            px.grad[idx] += self.grad[idx] * pv.value[static_cast<std::size_t>(fi)];
          }
    }
    if (pv.requires_grad) {
      pv.ensure_grad();
      for (int ci = 0; ci < c; ++ci)
        for (int fi = 0; fi < f; ++fi)
          for (int ti = 0; ti < t; ++ti) {
            std::size_t idx = (static_cast<std::size_t>(ci) * f + fi) * t + ti;
            pv.grad[static_cast<std::size_t>(fi)] += self.grad[idx] * px.value[idx];
          }
    }
  });
}

// Scales a [C,T] tensor by a per-frame vector [T] (attention weights).
inline Tensor mul_time(const Tensor& x, const Tensor& a) {
  if (x.shape().size() != 2) throw UsageError("mul_time expects [C,T]");
  const int c = x.dim(0), t = x.dim(1);
  if (a.numel() != static_cast<std::size_t>(t)) throw UsageError("mul_time: vector size mismatch");
  std::vector<Scalar> out(x.numel());
  for (int ci = 0; ci < c; ++ci)
    for (int ti = 0; ti < t; ++ti)
      out[static_cast<std::size_t>(ci) * t + ti] = x.data()[static_cast<std::size_t>(ci) * t + ti] * a.data()[static_cast<std::size_t>(ti)];
  return detail::make_result(x.shape(), std::move(out), {x, a}, [c, t](TensorImpl& self) {
    auto& px = *self.parents[0];
    auto& pa = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (int ci = 0; ci < c; ++ci)
        for (int ti = 0; ti < t; ++ti) {
          std::size_t idx = static_cast<std::size_t>(ci) * t + ti;
          px.grad[idx] += self.grad[idx] * pa.value[static_cast<std::size_t>(ti)];
        }
    }
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (int ci = 0; ci < c; ++ci)
        for (int ti = 0; ti < t; ++ti) {
          std::size_t idx = static_cast<std::size_t>(ci) * t + ti;
          pa.grad[static_cast<std::size_t>(ti)] += self.grad[idx] * px.value[idx];
        }
    }
  });
}

// ------------------------------ shape ops ---------------------------------

inline Tensor reshape(const Tensor& a, std::vector<int> shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  if (n != a.numel()) throw UsageError("reshape: numel mismatch");
  std::vector<Scalar> out = a.data();
  return detail::make_result(std::move(shape), std::move(out), {a}, [](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

inline Tensor concat_vec(const std::vector<Tensor>& parts) {
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != 1) throw UsageError("concat_vec expects 1-D tensors");
    n += p.numel();
  }
  std::vector<Scalar> out;
  out.reserve(n);
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    sizes.push_back(p.numel());
  }
  return detail::make_result({static_cast<int>(n)}, std::move(out), parts, [sizes](TensorImpl& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = *self.parents[k];
      if (p.requires_grad) {
        p.ensure_grad();
        for (std::size_t i = 0; i < sizes[k]; ++i) p.grad[i] += self.grad[off + i];
      }
      off += sizes[k];
    }
  });
}

// Concatenates [Ci,T] tensors along the channel axis.
inline Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw UsageError("concat_channels: empty");
  const int t = parts[0].dim(1);
  int c_total = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != 2 || p.dim(1) != t) throw UsageError("concat_channels: shape mismatch");
    c_total += p.dim(0);
  }
  std::vector<Scalar> out;
  out.reserve(static_cast<std::size_t>(c_total) * t);
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    sizes.push_back(p.numel());
  }
  return detail::make_result({c_total, t}, std::move(out), parts, [sizes](TensorImpl& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = *self.parents[k];
      if (p.requires_grad) {
        p.ensure_grad();
        for (std::size_t i = 0; i < sizes[k]; ++i) p.grad[i] += self.grad[off + i];
      }
      off += sizes[k];
    }
  });
}

inline Tensor crop1d(const Tensor& a, int start, int len) {
  if (a.shape().size() != 1) throw UsageError("crop1d expects 1-D");
  if (start < 0 || start + len > a.dim(0)) throw UsageError("crop1d: out of range");
  std::vector<Scalar> out(a.data().begin() + start, a.data().begin() + start + len);
  return detail::make_result({len}, std::move(out), {a}, [start](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[static_cast<std::size_t>(start) + i] += self.grad[i];
  });
}

inline Tensor pad1d(const Tensor& a, int left, int right) {
  if (a.shape().size() != 1) throw UsageError("pad1d expects 1-D");
  const int n = a.dim(0);
  std::vector<Scalar> out(static_cast<std::size_t>(n + left + right), 0.0);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(left + i)] = a.data()[static_cast<std::size_t>(i)];
  return detail::make_result({n + left + right}, std::move(out), {a}, [left, n](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int i = 0; i < n; ++i) p.grad[static_cast<std::size_t>(i)] += self.grad[static_cast<std::size_t>(left + i)];
  });
}

// ------------------------------ linear algebra ----------------------------

using EigenRowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EigenMap = Eigen::Map<EigenRowMat>;
using EigenCMap = Eigen::Map<const EigenRowMat>;

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0))
    throw UsageError("matmul: shape mismatch");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<Scalar> out(static_cast<std::size_t>(m) * n);
  EigenCMap ma(a.data().data(), m, k), mb(b.data().data(), k, n);
  EigenMap(out.data(), m, n).noalias() = ma * mb;
  return detail::make_result({m, n}, std::move(out), {a, b}, [m, k, n](TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    EigenCMap g(self.grad.data(), m, n);
    if (pa.requires_grad) {
      pa.ensure_grad();
      EigenCMap vb(pb.value.data(), k, n);
      EigenMap(pa.grad.data(), m, k).noalias() += g * vb.transpose();
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      EigenCMap va(pa.value.data(), m, k);
      EigenMap(pb.grad.data(), k, n).noalias() += va.transpose() * g;
    }
  });
}

// y = W x + b with x:[K], W:[O,K], b:[O].
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.shape().size() != 1 || w.shape().size() != 2 || w.dim(1) != x.dim(0) || b.dim(0) != w.dim(0))
    throw UsageError("linear: shape mismatch");
  const int o = w.dim(0), k = w.dim(1);
  std::vector<Scalar> out(static_cast<std::size_t>(o));
  for (int i = 0; i < o; ++i) {
    Scalar s = b.data()[static_cast<std::size_t>(i)];
    const Scalar* wr = w.data().data() + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) s += wr[j] * x.data()[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s;
  }
  return detail::make_result({o}, std::move(out), {x, w, b}, [o, k](TensorImpl& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    if (px.requires_grad) {
      px.ensure_grad();
      for (int i = 0; i < o; ++i) {
        const Scalar g = self.grad[static_cast<std::size_t>(i)];
        const Scalar* wr = pw.value.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) px.grad[static_cast<std::size_t>(j)] += g * wr[j];
      }
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      for (int i = 0; i < o; ++i) {
        const Scalar g = self.grad[static_cast<std::size_t>(i)];
        Scalar* wg = pw.grad.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) wg[j] += g * px.value[static_cast<std::size_t>(j)];
      }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int i = 0; i < o; ++i) pb.grad[static_cast<std::size_t>(i)] += self.grad[static_cast<std::size_t>(i)];
    }
  });
}

// ----------------------- classification primitives ------------------------

inline Tensor softmax_vec(const Tensor& x) {
  if (x.shape().size() != 1) throw UsageError("softmax_vec expects 1-D");
  const std::size_t n = x.numel();
  Scalar m = x.data()[0];
  for (Scalar v : x.data()) m = std::max(m, v);
  std::vector<Scalar> out(n);
  Scalar z = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(x.data()[i] - m);
    z += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= z;
  return detail::make_result(x.shape(), std::move(out), {x}, [](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    Scalar dot = 0;
    for (std::size_t i = 0; i < self.value.size(); ++i) dot += self.grad[i] * self.value[i];
    for (std::size_t i = 0; i < self.value.size(); ++i) p.grad[i] += self.value[i] * (self.grad[i] - dot);
  });
}

// Numerically stable cross-entropy of a logit vector against an integer label.
inline Tensor cross_entropy_logits(const Tensor& logits, int label) {
  if (logits.shape().size() != 1) throw UsageError("cross_entropy_logits expects 1-D logits");
  const int k = logits.dim(0);
  if (label < 0 || label >= k) throw DataError("label out of range");
  Scalar m = logits.data()[0];
  for (Scalar v : logits.data()) m = std::max(m, v);
  Scalar z = 0;
  for (Scalar v : logits.data()) z += std::exp(v - m);
  const Scalar lse = m + std::log(z);
  const Scalar loss = lse - logits.data()[static_cast<std::size_t>(label)];
  return detail::make_result({1}, {loss}, {logits}, [label, m, z](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const Scalar g = self.grad[0];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      Scalar soft = std::exp(p.value[i] - m) / z;
      p.grad[i] += g * (soft - (static_cast<int>(i) == label ? 1.0 : 0.0));
    }
  });
}

inline Tensor gather_index(const Tensor& x, int idx) {
  if (x.shape().size() != 1) throw UsageError("gather_index expects 1-D");
  if (idx < 0 || idx >= x.dim(0)) throw UsageError("gather_index: out of range");
  return detail::make_result({1}, {x.data()[static_cast<std::size_t>(idx)]}, {x}, [idx](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    p.grad[static_cast<std::size_t>(idx)] += self.grad[0];
  });
}

// Max over entries of a 1-D tensor excluding one index; gradient goes to the argmax.
inline Tensor masked_max(const Tensor& x, int exclude) {
  if (x.shape().size() != 1 || x.dim(0) < 2) throw UsageError("masked_max expects 1-D with >= 2 entries");
  int arg = -1;
  Scalar best = 0;
  for (int i = 0; i < x.dim(0); ++i) {
    if (i == exclude) continue;
    Scalar v = x.data()[static_cast<std::size_t>(i)];
    if (arg < 0 || v > best) {
      arg = i;
      best = v;
    }
  }
  return detail::make_result({1}, {best}, {x}, [arg](TensorImpl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    p.grad[static_cast<std::size_t>(arg)] += self.grad[0];
  });
}

inline int argmax(const std::vector<Scalar>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

}  // namespace advsig

#endif  // ADVSIG_TENSOR_HPP
