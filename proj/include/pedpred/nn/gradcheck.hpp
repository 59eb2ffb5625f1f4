#pragma once

// Central-difference verification of reverse-mode gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pedpred/nn/tape.hpp"
#include "pedpred/nn/tensor.hpp"
#include "pedpred/random.hpp"

namespace pedpred::nn {

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t max_entries_per_tensor = 0;  // 0 checks every entry; otherwise a seeded random subset
  std::uint64_t seed = 1;
  double floor = 1e-8;  // denominator floor of the relative error
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<tensor>[index]"
  std::size_t checked = 0;
};

/// A tensor to perturb, with the analytic gradient already computed for it.
struct GradTarget {
  std::string name;
  std::span<double> values;
  std::vector<double> analytic;
};

inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max(floor, std::abs(analytic) + std::abs(numeric));
}

/// Compares analytic gradients against central differences of `loss`.
inline GradCheckResult gradient_check(const std::function<double()>& loss, std::vector<GradTarget>& targets,
                                      const GradCheckOptions& opt = {}) {
  GradCheckResult result;
  Rng rng(opt.seed);
  for (auto& target : targets) {
    const std::size_t n = target.values.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (opt.max_entries_per_tensor != 0 && n > opt.max_entries_per_tensor) {
      std::shuffle(idx.begin(), idx.end(), rng.engine());
      idx.resize(opt.max_entries_per_tensor);
    }
    for (std::size_t i : idx) {
      const double saved = target.values[i];
      target.values[i] = saved + opt.eps;
      const double up = loss();
      target.values[i] = saved - opt.eps;
      const double down = loss();
      target.values[i] = saved;
      const double numeric = (up - down) / (2.0 * opt.eps);
      const double err = relative_error(target.analytic[i], numeric, opt.floor);
      ++result.checked;
      if (err > result.max_rel_error || result.worst.empty()) {
        result.max_rel_error = std::max(err, result.max_rel_error);
        result.worst = target.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

/// Checks d(loss)/d(theta) for every trainable parameter of `model`.
/// `build` records the loss on the given tape and returns it.
template <class Model>
GradCheckResult gradient_check(Model& model, const std::function<Var(Tape&)>& build, const GradCheckOptions& opt = {}) {
  zero_grads(model);
  {
    Tape tape(true);
    Var l = build(tape);
    tape.backward(l);
  }
  std::vector<GradTarget> targets;
  model.visit([&](const std::string& name, Parameter& p) {
    if (!p.trainable) return;
    targets.push_back({name, p.value.span(), p.grad.vec()});
  });
  auto eval = [&] {
    Tape tape(false);
    return build(tape).scalar();
  };
  return gradient_check(eval, targets, opt);
}

}  // namespace pedpred::nn
