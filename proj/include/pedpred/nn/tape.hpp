#pragma once

// Reverse-mode automatic differentiation over vector-valued nodes.
//
// Every op appends a node holding its value and, when any input needs a gradient,
// a closure that pushes the node's gradient back into its inputs. Parameters are
// leaves that read and accumulate directly into Parameter storage.

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

#include "pedpred/nn/kernels.hpp"
#include "pedpred/nn/tensor.hpp"
#include "pedpred/random.hpp"

namespace pedpred::nn {

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  std::span<const double> value() const;
  std::size_t size() const;
  double scalar() const;
};

/// Receives the node's own value and gradient.
using BackwardFn = std::function<void(std::span<const double> y, std::span<const double> dy)>;

class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Leaf without gradient.
  Var constant(std::vector<double> v) { return push(std::move(v), false); }
  Var constant(std::span<const double> v) { return push(std::vector<double>(v.begin(), v.end()), false); }

  /// Leaf whose gradient is kept and readable after backward().
  Var input(std::vector<double> v) { return push(std::move(v), grad_enabled_); }

  /// Trainable parameter: gradients accumulate into p.grad.
  Var param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    Node n;
    n.ext = p.value.data();
    n.n = p.value.size();
    n.requires_grad = grad_enabled_ && p.trainable;
    if (n.requires_grad) {
      if (p.grad.size() != p.value.size()) p.grad = Tensor(p.value.shape());
      n.ext_grad = p.grad.data();
    }
    return register_param(&p, std::move(n));
  }

  /// Read-only parameter (no gradient).
  Var param(const Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    Node n;
    n.ext = p.value.data();
    n.n = p.value.size();
    return register_param(&p, std::move(n));
  }

  /// Copy of v with the gradient path cut.
  Var detach(Var v) { return constant(value(v)); }

  std::span<const double> value(Var v) const { return {data(v.id), nodes_[v.id].n}; }
  const double* data(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.ext ? n.ext : n.own.data();
  }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient of v after backward(); zeros if nothing reached it.
  std::vector<double> grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.ext_grad) return {n.ext_grad, n.ext_grad + n.n};
    if (n.own_grad.empty()) return std::vector<double>(n.n, 0.0);
    return n.own_grad;
  }

  /// Gradient accumulator of v, allocated on first use. Only valid for nodes that require grad.
  double* grad_buffer(Var v) {
    Node& n = nodes_[v.id];
    n.reached = true;
    if (n.ext_grad) return n.ext_grad;
    if (n.own_grad.empty()) n.own_grad.assign(n.n, 0.0);
    return n.own_grad.data();
  }

  /// Appends an op node. `backward` is kept only when some input needs a gradient.
  Var make(std::vector<double> v, bool needs_grad, BackwardFn backward) {
    Var out = push(std::move(v), needs_grad && grad_enabled_);
    if (nodes_[out.id].requires_grad) nodes_[out.id].backward = std::move(backward);
    return out;
  }

  /// Propagates d(loss)/d(node) for a scalar loss through every recorded op.
  void backward(Var loss) {
    if (loss.tape != this || loss.id >= nodes_.size()) throw InvalidArgument("backward: variable not on this tape");
    if (backward_done_) throw InvalidArgument("backward: tape already consumed");
    if (nodes_[loss.id].n != 1) throw ShapeError("backward: loss must be a scalar");
    backward_done_ = true;
    if (!nodes_[loss.id].requires_grad) return;
    grad_buffer(loss)[0] += 1.0;
    for (std::int64_t i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.reached || !n.backward) continue;
      const double* g = n.ext_grad ? n.ext_grad : n.own_grad.data();
      n.backward({data(static_cast<std::uint32_t>(i)), n.n}, {g, n.n});
    }
  }

 private:
  struct Node {
    std::vector<double> own;
    const double* ext = nullptr;
    std::size_t n = 0;
    std::vector<double> own_grad;
    double* ext_grad = nullptr;
    bool requires_grad = false;
    bool reached = false;
    BackwardFn backward;
  };

  Var push(std::vector<double> v, bool requires_grad) {
    Node n;
    n.n = v.size();
    n.own = std::move(v);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Var register_param(const Parameter* p, Node n) {
    nodes_.push_back(std::move(n));
    const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
    param_nodes_.emplace(p, id);
    return {this, id};
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;
  bool grad_enabled_ = true;
  bool backward_done_ = false;
};

inline std::span<const double> Var::value() const { return tape->value(*this); }
inline std::size_t Var::size() const { return tape->value(*this).size(); }
inline double Var::scalar() const {
  auto v = value();
  if (v.size() != 1) throw ShapeError("scalar(): node has " + std::to_string(v.size()) + " elements");
  return v[0];
}

namespace detail {

inline Tape& same_tape(std::initializer_list<Var> vs) {
  Tape* t = vs.begin()->tape;
  for (Var v : vs)
    if (v.tape != t) throw InvalidArgument("variables live on different tapes");
  return *t;
}

inline bool needs(Var v) { return v.tape->requires_grad(v); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::vector<double> copy(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace detail

/// y = W x + b, W stored [out, in].
inline Var linear(Var x, Var w, Var b) {
  Tape& t = detail::same_tape({x, w, b});
  const std::size_t in = x.size();
  const std::size_t out = b.size();
  if (w.size() != out * in)
    throw ShapeError("linear: weight has " + std::to_string(w.size()) + " elements, expected " +
                     std::to_string(out) + "x" + std::to_string(in));
  std::vector<double> y(out);
  kernels::affine(t.data(w.id), t.data(b.id), t.data(x.id), y.data(), out, in);
  const bool gx = detail::needs(x), gw = detail::needs(w), gb = detail::needs(b);
  return t.make(std::move(y), gx || gw || gb,
                [&t, x, w, b, out, in, gx, gw, gb](std::span<const double>, std::span<const double> dy) {
                  if (gx) kernels::affine_backward_input(t.data(w.id), dy.data(), t.grad_buffer(x), out, in);
                  if (gw) kernels::outer_accumulate(dy.data(), t.data(x.id), t.grad_buffer(w), out, in);
                  if (gb) kernels::vec(t.grad_buffer(b), out) += kernels::cvec(dy.data(), out);
                });
}

inline Var relu(Var x) {
  Tape& t = *x.tape;
  auto xv = x.value();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return t.make(std::move(y), detail::needs(x), [&t, x](std::span<const double> y, std::span<const double> dy) {
    double* dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] > 0.0) dx[i] += dy[i];
  });
}

inline Var sigmoid(Var x) {
  Tape& t = *x.tape;
  auto xv = x.value();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = detail::sigmoid(xv[i]);
  return t.make(std::move(y), detail::needs(x), [&t, x](std::span<const double> y, std::span<const double> dy) {
    double* dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

inline Var tanh(Var x) {
  Tape& t = *x.tape;
  auto xv = x.value();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(xv[i]);
  return t.make(std::move(y), detail::needs(x), [&t, x](std::span<const double> y, std::span<const double> dy) {
    double* dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
  });
}

/// Inverted dropout: zeroes each element with probability p and rescales survivors
/// by 1/(1-p). Identity when not training.
inline Var dropout(Var x, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw InvalidArgument("dropout rate must be below 1");
  Tape& t = *x.tape;
  auto xv = x.value();
  std::vector<double> mask(xv.size());
  std::vector<double> y(xv.size());
  const double keep = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask[i] = rng.bernoulli(p) ? 0.0 : keep;
    y[i] = xv[i] * mask[i];
  }
  return t.make(std::move(y), detail::needs(x),
                [&t, x, mask = std::move(mask)](std::span<const double>, std::span<const double> dy) {
                  double* dx = t.grad_buffer(x);
                  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * mask[i];
                });
}

inline Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  Tape& t = *parts.front().tape;
  std::vector<double> y;
  bool g = false;
  for (Var p : parts) {
    if (p.tape != &t) throw InvalidArgument("variables live on different tapes");
    auto v = p.value();
    y.insert(y.end(), v.begin(), v.end());
    g = g || detail::needs(p);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.make(std::move(y), g, [&t, inputs](std::span<const double>, std::span<const double> dy) {
    std::size_t off = 0;
    for (Var p : inputs) {
      const std::size_t n = p.size();
      if (detail::needs(p)) {
        double* dx = t.grad_buffer(p);
        for (std::size_t i = 0; i < n; ++i) dx[i] += dy[off + i];
      }
      off += n;
    }
  });
}

inline Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

inline Var slice(Var x, std::size_t offset, std::size_t length) {
  if (offset + length > x.size()) throw ShapeError("slice out of range");
  Tape& t = *x.tape;
  auto xv = x.value();
  std::vector<double> y(xv.begin() + static_cast<std::ptrdiff_t>(offset),
                        xv.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return t.make(std::move(y), detail::needs(x), [&t, x, offset](std::span<const double>, std::span<const double> dy) {
    double* dx = t.grad_buffer(x) + offset;
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
  });
}

inline Var add(Var a, Var b) {
  Tape& t = detail::same_tape({a, b});
  if (a.size() != b.size()) throw ShapeError("add: size mismatch");
  auto av = a.value();
  auto bv = b.value();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  return t.make(std::move(y), detail::needs(a) || detail::needs(b),
                [&t, a, b](std::span<const double>, std::span<const double> dy) {
                  for (Var v : {a, b}) {
                    if (!detail::needs(v)) continue;
                    double* dx = t.grad_buffer(v);
                    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
                  }
                });
}

inline Var scale(Var x, double s) {
  Tape& t = *x.tape;
  auto xv = x.value();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = s * xv[i];
  return t.make(std::move(y), detail::needs(x), [&t, x, s](std::span<const double>, std::span<const double> dy) {
    double* dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += s * dy[i];
  });
}

inline Var sum(Var x) {
  Tape& t = *x.tape;
  double acc = 0.0;
  for (double v : x.value()) acc += v;
  return t.make({acc}, detail::needs(x), [&t, x](std::span<const double>, std::span<const double> dy) {
    double* dx = t.grad_buffer(x);
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) dx[i] += dy[0];
  });
}

/// Sum of squared elements.
inline Var sum_squares(Var x) {
  Tape& t = *x.tape;
  double acc = 0.0;
  for (double v : x.value()) acc += v * v;
  return t.make({acc}, detail::needs(x), [&t, x](std::span<const double>, std::span<const double> dy) {
    double* dx = t.grad_buffer(x);
    auto xv = x.value();
    for (std::size_t i = 0; i < xv.size(); ++i) dx[i] += 2.0 * xv[i] * dy[0];
  });
}

/// sum_i (a_i - b_i)^2
inline Var sum_squared_error(Var a, Var b) {
  Tape& t = detail::same_tape({a, b});
  if (a.size() != b.size()) throw ShapeError("sum_squared_error: size mismatch");
  auto av = a.value();
  auto bv = b.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += (av[i] - bv[i]) * (av[i] - bv[i]);
  return t.make({acc}, detail::needs(a) || detail::needs(b),
                [&t, a, b](std::span<const double>, std::span<const double> dy) {
                  auto av = a.value();
                  auto bv = b.value();
                  if (detail::needs(a)) {
                    double* da = t.grad_buffer(a);
                    for (std::size_t i = 0; i < av.size(); ++i) da[i] += 2.0 * (av[i] - bv[i]) * dy[0];
                  }
                  if (detail::needs(b)) {
                    double* db = t.grad_buffer(b);
                    for (std::size_t i = 0; i < av.size(); ++i) db[i] -= 2.0 * (av[i] - bv[i]) * dy[0];
                  }
                });
}

/// Mean over `steps` of the Euclidean norm of (u_l - target_l); both hold interleaved (x, y) pairs.
inline Var mean_step_distance(Var u, Var target, std::size_t steps) {
  Tape& t = detail::same_tape({u, target});
  if (u.size() != 2 * steps || target.size() != 2 * steps) throw ShapeError("mean_step_distance: length mismatch");
  auto uv = u.value();
  auto tv = target.value();
  std::vector<double> norms(steps);
  double acc = 0.0;
  for (std::size_t l = 0; l < steps; ++l) {
    norms[l] = std::hypot(uv[2 * l] - tv[2 * l], uv[2 * l + 1] - tv[2 * l + 1]);
    acc += norms[l];
  }
  const double inv = 1.0 / static_cast<double>(steps);
  return t.make({acc * inv}, detail::needs(u) || detail::needs(target),
                [&t, u, target, norms = std::move(norms), inv](std::span<const double>, std::span<const double> dy) {
                  auto uv = u.value();
                  auto tv = target.value();
                  for (std::size_t l = 0; l < norms.size(); ++l) {
                    if (norms[l] == 0.0) continue;  // subgradient 0 at the kink
                    const double s = dy[0] * inv / norms[l];
                    const double gx = s * (uv[2 * l] - tv[2 * l]);
                    const double gy = s * (uv[2 * l + 1] - tv[2 * l + 1]);
                    if (detail::needs(u)) {
                      double* du = t.grad_buffer(u);
                      du[2 * l] += gx;
                      du[2 * l + 1] += gy;
                    }
                    if (detail::needs(target)) {
                      double* dt = t.grad_buffer(target);
                      dt[2 * l] -= gx;
                      dt[2 * l + 1] -= gy;
                    }
                  }
                });
}

/// Fused LSTM cell. Gate pre-activations z = W [x; h] + b with rows ordered (i, f, g, o).
/// Returns [h'; c'] (length 2H).
inline Var lstm_cell(Var x, Var h, Var c, Var w, Var b) {
  Tape& t = detail::same_tape({x, h, c, w, b});
  const std::size_t hs = h.size();
  const std::size_t in = x.size();
  const std::size_t cols = in + hs;
  if (c.size() != hs) throw ShapeError("lstm_cell: h and c differ in size");
  if (b.size() != 4 * hs || w.size() != 4 * hs * cols) throw ShapeError("lstm_cell: weight shape mismatch");

  std::vector<double> xh(cols);
  std::copy(x.value().begin(), x.value().end(), xh.begin());
  std::copy(h.value().begin(), h.value().end(), xh.begin() + static_cast<std::ptrdiff_t>(in));
  std::vector<double> gates(4 * hs);
  kernels::affine(t.data(w.id), t.data(b.id), xh.data(), gates.data(), 4 * hs, cols);
  auto cv = c.value();
  std::vector<double> out(2 * hs);
  std::vector<double> tanh_c(hs);
  for (std::size_t k = 0; k < hs; ++k) {
    double& gi = gates[k];
    double& gf = gates[hs + k];
    double& gg = gates[2 * hs + k];
    double& go = gates[3 * hs + k];
    gi = detail::sigmoid(gi);
    gf = detail::sigmoid(gf);
    gg = std::tanh(gg);
    go = detail::sigmoid(go);
    const double cn = gf * cv[k] + gi * gg;
    tanh_c[k] = std::tanh(cn);
    out[hs + k] = cn;
    out[k] = go * tanh_c[k];
  }
  const bool any = detail::needs(x) || detail::needs(h) || detail::needs(c) || detail::needs(w) || detail::needs(b);
  return t.make(
      std::move(out), any,
      [&t, x, h, c, w, b, hs, in, cols, xh = std::move(xh), gates = std::move(gates),
       tanh_c = std::move(tanh_c)](std::span<const double>, std::span<const double> dy) {
        auto cv = c.value();
        std::vector<double> dz(4 * hs);
        std::vector<double> dc_prev(hs);
        for (std::size_t k = 0; k < hs; ++k) {
          const double gi = gates[k], gf = gates[hs + k], gg = gates[2 * hs + k], go = gates[3 * hs + k];
          const double dh = dy[k];
          const double dc = dy[hs + k] + dh * go * (1.0 - tanh_c[k] * tanh_c[k]);
          dz[k] = dc * gg * gi * (1.0 - gi);
          dz[hs + k] = dc * cv[k] * gf * (1.0 - gf);
          dz[2 * hs + k] = dc * gi * (1.0 - gg * gg);
          dz[3 * hs + k] = dh * tanh_c[k] * go * (1.0 - go);
          dc_prev[k] = dc * gf;
        }
        if (detail::needs(w)) kernels::outer_accumulate(dz.data(), xh.data(), t.grad_buffer(w), 4 * hs, cols);
        if (detail::needs(b)) kernels::vec(t.grad_buffer(b), 4 * hs) += kernels::cvec(dz.data(), 4 * hs);
        if (detail::needs(x) || detail::needs(h)) {
          std::vector<double> dxh(cols, 0.0);
          kernels::affine_backward_input(t.data(w.id), dz.data(), dxh.data(), 4 * hs, cols);
          if (detail::needs(x)) {
            double* dx = t.grad_buffer(x);
            for (std::size_t i = 0; i < in; ++i) dx[i] += dxh[i];
          }
          if (detail::needs(h)) {
            double* dh = t.grad_buffer(h);
            for (std::size_t i = 0; i < hs; ++i) dh[i] += dxh[in + i];
          }
        }
        if (detail::needs(c)) {
          double* dc = t.grad_buffer(c);
          for (std::size_t k = 0; k < hs; ++k) dc[k] += dc_prev[k];
        }
      });
}

/// Cross-correlation with zero padding; x is in_h x in_w x in_c.
inline Var conv2d(Var x, Var k, Var b, const ConvGeometry& g) {
  Tape& t = detail::same_tape({x, k, b});
  g.validate();
  if (x.size() != g.in_size()) throw ShapeError("conv2d: input size mismatch");
  if (k.size() != g.kernel_size() || b.size() != static_cast<std::size_t>(g.out_c))
    throw ShapeError("conv2d: kernel shape mismatch");
  std::vector<double> y(g.out_size());
  kernels::conv2d(t.data(x.id), t.data(k.id), t.data(b.id), g, y.data());
  const bool gx = detail::needs(x), gk = detail::needs(k), gb = detail::needs(b);
  return t.make(std::move(y), gx || gk || gb,
                [&t, x, k, b, g, gx, gk, gb](std::span<const double>, std::span<const double> dy) {
                  using namespace kernels;
                  const std::size_t positions = static_cast<std::size_t>(g.out_h()) * g.out_w();
                  const auto oc = static_cast<std::size_t>(g.out_c);
                  const auto patch = static_cast<std::size_t>(g.patch());
                  auto dym = cmat(dy.data(), positions, oc);
                  if (gk) {
                    RowMat cols(static_cast<Eigen::Index>(positions), static_cast<Eigen::Index>(patch));
                    im2col(t.data(x.id), g, cols.data());
                    mat(t.grad_buffer(k), oc, patch).noalias() += dym.transpose() * cols;
                  }
                  if (gb) column_sum_accumulate(dy.data(), t.grad_buffer(b), positions, oc);
                  if (gx) {
                    RowMat dcols = dym * cmat(t.data(k.id), oc, patch);
                    col2im_accumulate(dcols.data(), g, t.grad_buffer(x));
                  }
                });
}

/// Transposed convolution reusing the kernel of a conv with geometry g (tied weights):
/// maps out_h x out_w x out_c onto in_h x in_w x in_c; b has in_c entries.
inline Var conv2d_transpose(Var y, Var k, Var b, const ConvGeometry& g) {
  Tape& t = detail::same_tape({y, k, b});
  g.validate();
  if (y.size() != g.out_size()) throw ShapeError("conv2d_transpose: input size mismatch");
  if (k.size() != g.kernel_size() || b.size() != static_cast<std::size_t>(g.in_c))
    throw ShapeError("conv2d_transpose: kernel shape mismatch");
  std::vector<double> z(g.in_size());
  kernels::conv2d_transpose(t.data(y.id), t.data(k.id), t.data(b.id), g, z.data());
  const bool gy = detail::needs(y), gk = detail::needs(k), gb = detail::needs(b);
  return t.make(std::move(z), gy || gk || gb,
                [&t, y, k, b, g, gy, gk, gb](std::span<const double>, std::span<const double> dz) {
                  using namespace kernels;
                  const std::size_t positions = static_cast<std::size_t>(g.out_h()) * g.out_w();
                  const auto oc = static_cast<std::size_t>(g.out_c);
                  const auto patch = static_cast<std::size_t>(g.patch());
                  if (gb) {
                    double* db = t.grad_buffer(b);
                    const std::size_t pixels = static_cast<std::size_t>(g.in_h) * g.in_w;
                    for (std::size_t p = 0; p < pixels; ++p)
                      for (int c = 0; c < g.in_c; ++c) db[c] += dz[p * g.in_c + c];
                  }
                  if (!gy && !gk) return;
                  RowMat dcols(static_cast<Eigen::Index>(positions), static_cast<Eigen::Index>(patch));
                  im2col(dz.data(), g, dcols.data());
                  if (gk) mat(t.grad_buffer(k), oc, patch).noalias() += cmat(t.data(y.id), positions, oc).transpose() * dcols;
                  if (gy) mat(t.grad_buffer(y), positions, oc).noalias() += dcols * cmat(t.data(k.id), oc, patch).transpose();
                });
}

}  // namespace pedpred::nn
