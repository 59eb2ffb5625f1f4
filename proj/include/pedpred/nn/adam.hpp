#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pedpred/nn/tensor.hpp"

namespace pedpred::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update of one tensor at step t (t >= 1).
inline void adam_update(std::span<double> value, std::span<const double> grad, std::span<double> m,
                        std::span<double> v, const AdamConfig& cfg, long t) {
  if (value.size() != grad.size() || m.size() != value.size() || v.size() != value.size())
    throw ShapeError("adam_update: buffer sizes differ");
  if (t < 1) throw InvalidArgument("adam_update: step counter starts at 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const double b1 = cfg.beta1, b2 = cfg.beta2, lr = cfg.lr, eps = cfg.eps;
  double* __restrict pv = value.data();
  const double* __restrict pg = grad.data();
  double* __restrict pm = m.data();
  double* __restrict ps = v.data();
  const std::size_t n = value.size();
  for (std::size_t i = 0; i < n; ++i) {
    pm[i] = b1 * pm[i] + (1.0 - b1) * pg[i];
    ps[i] = b2 * ps[i] + (1.0 - b2) * pg[i] * pg[i];
    const double mhat = pm[i] / c1;
    const double vhat = ps[i] / c2;
    pv[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

/// Adam over every trainable parameter of a model, in visit order.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  AdamConfig& config() { return cfg_; }
  long steps() const { return t_; }

  /// Applies one update from the accumulated gradients, then clears them.
  template <class Model>
  void step(Model& model) {
    ++t_;
    std::size_t slot = 0;
    model.visit([&](const std::string& name, Parameter& p) {
      if (!p.trainable) return;
      if (slot == m_.size()) {
        m_.emplace_back(p.value.shape());
        v_.emplace_back(p.value.shape());
      }
      if (m_[slot].size() != p.value.size()) throw ShapeError("Adam: parameter layout changed between steps");
      adam_update(p.value.span(), p.grad.span(), m_[slot].span(), v_[slot].span(), cfg_, t_);
      if (!p.value.all_finite()) throw NumericError("non-finite value in parameter '" + name + "' after update");
      p.zero_grad();
      ++slot;
    });
  }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace pedpred::nn
