#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pedpred/nn/tape.hpp"
#include "pedpred/nn/tensor.hpp"

namespace pedpred::nn {

enum class Activation { identity, relu, sigmoid, tanh };

inline Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::relu:
      return relu(x);
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::tanh:
      return tanh(x);
    case Activation::identity:
      break;
  }
  return x;
}

/// Fully connected layer, weight [out, in].
struct Linear {
  Parameter weight;
  Parameter bias;
  Activation activation = Activation::identity;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Activation act = Activation::identity)
      : weight({out, in}, true), bias({out}, false), activation(act) {}

  std::size_t in() const { return weight.value.dim(1); }
  std::size_t out() const { return weight.value.dim(0); }

  void init(Rng& rng) {
    init_uniform(weight.value, 1.0 / std::sqrt(static_cast<double>(in())), rng);
    bias.value.fill(0.0);
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }

  template <class Self>
  static Var apply(Self& self, Tape& t, Var x) {
    if (x.size() != self.in())
      throw ShapeError("linear layer expects " + std::to_string(self.in()) + " inputs, got " +
                       std::to_string(x.size()));
    return activate(linear(x, t.param(self.weight), t.param(self.bias)), self.activation);
  }
  Var operator()(Tape& t, Var x) { return apply(*this, t, x); }
  Var operator()(Tape& t, Var x) const { return apply(*this, t, x); }
};

/// Convolution layer; kernel [out_c, k, k, in_c], bias [out_c].
struct Conv2d {
  ConvGeometry geometry;
  Parameter kernel;
  Parameter bias;

  Conv2d() = default;
  explicit Conv2d(const ConvGeometry& g)
      : geometry(g),
        kernel({static_cast<std::size_t>(g.out_c), static_cast<std::size_t>(g.kernel),
                static_cast<std::size_t>(g.kernel), static_cast<std::size_t>(g.in_c)},
               true),
        bias({static_cast<std::size_t>(g.out_c)}, false) {
    g.validate();
  }

  void init(Rng& rng) {
    init_uniform(kernel.value, 1.0 / std::sqrt(static_cast<double>(geometry.patch())), rng);
    bias.value.fill(0.0);
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".kernel", kernel);
    f(prefix + ".bias", bias);
  }

  Var operator()(Tape& t, Var x) { return conv2d(x, t.param(kernel), t.param(bias), geometry); }
  Var operator()(Tape& t, Var x) const { return conv2d(x, t.param(kernel), t.param(bias), geometry); }
};

/// Recurrent state of one LSTM layer.
struct LstmState {
  std::vector<double> h;
  std::vector<double> c;

  static LstmState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; }
  bool operator==(const LstmState&) const = default;
};

/// LSTM layer; weight [4H, in + H] with gate blocks (i, f, g, o), bias [4H].
struct LstmCell {
  Parameter weight;
  Parameter bias;

  LstmCell() = default;
  LstmCell(std::size_t in, std::size_t hidden) : weight({4 * hidden, in + hidden}, true), bias({4 * hidden}, false) {}

  std::size_t hidden() const { return bias.value.size() / 4; }
  std::size_t in() const { return weight.value.dim(1) - hidden(); }

  void init(Rng& rng) {
    init_uniform(weight.value, 1.0 / std::sqrt(static_cast<double>(weight.value.dim(1))), rng);
    bias.value.fill(0.0);
    const std::size_t hs = hidden();
    for (std::size_t k = 0; k < hs; ++k) bias.value[hs + k] = 1.0;  // forget gate
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }

  /// Returns (h', c') as tape variables.
  template <class Self>
  static std::pair<Var, Var> apply(Self& self, Tape& t, Var x, Var h, Var c) {
    const std::size_t hs = self.hidden();
    if (x.size() != self.in() || h.size() != hs || c.size() != hs)
      throw ShapeError("lstm cell shape mismatch");
    Var hc = lstm_cell(x, h, c, t.param(self.weight), t.param(self.bias));
    return {slice(hc, 0, hs), slice(hc, hs, hs)};
  }
  std::pair<Var, Var> operator()(Tape& t, Var x, Var h, Var c) { return apply(*this, t, x, h, c); }
  std::pair<Var, Var> operator()(Tape& t, Var x, Var h, Var c) const { return apply(*this, t, x, h, c); }
};

// Plain (gradient-free) entry points.

inline Tensor fc_forward(const Linear& layer, const Tensor& x) {
  Tape t(false);
  Var y = layer(t, t.constant(x.span()));
  auto v = y.value();
  return Tensor({v.size()}, detail::copy(v));
}

inline Tensor conv2d_forward(const Conv2d& layer, const Tensor& x) {
  const auto& g = layer.geometry;
  if (x.size() != g.in_size()) throw ShapeError("conv2d_forward: input must be " + std::to_string(g.in_h) + "x" +
                                                std::to_string(g.in_w) + "x" + std::to_string(g.in_c));
  Tape t(false);
  Var y = layer(t, t.constant(x.span()));
  return Tensor({static_cast<std::size_t>(g.out_h()), static_cast<std::size_t>(g.out_w()),
                 static_cast<std::size_t>(g.out_c)},
                detail::copy(y.value()));
}

/// One LSTM step; returns (h', new state).
inline std::pair<Tensor, LstmState> lstm_step(const LstmCell& cell, const Tensor& x, const LstmState& state) {
  Tape t(false);
  auto [h, c] = cell(t, t.constant(x.span()), t.constant(state.h), t.constant(state.c));
  LstmState next{detail::copy(h.value()), detail::copy(c.value())};
  return {Tensor({next.h.size()}, next.h), std::move(next)};
}

}  // namespace pedpred::nn
