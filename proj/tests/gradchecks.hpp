#pragma once

// Finite-difference checks of every layer type and of the full predictor loss.

#include <functional>
#include <string>
#include <vector>

#include "pedpred/nn/gradcheck.hpp"
#include "pedpred/nn/layers.hpp"
#include "pedpred/predictor.hpp"

namespace pedpred::checks {

struct CheckResult {
  std::string name;
  double error = 0.0;        // over parameters
  double input_error = 0.0;  // over inputs
  std::size_t entries = 0;
  std::string worst;
};

using Build = std::function<nn::Var(nn::Tape&, std::vector<nn::Var>&)>;

/// Checks d(loss)/d(parameters) and d(loss)/d(inputs). `inputs` are perturbed in place.
template <class Model>
CheckResult check(const std::string& name, Model& model, std::vector<std::vector<double>>& inputs, const Build& build,
                  const nn::GradCheckOptions& opt = {}, const nn::GradCheckOptions& input_opt = {}) {
  nn::zero_grads(model);
  std::vector<nn::GradTarget> input_targets;
  {
    nn::Tape t(true);
    std::vector<nn::Var> vars;
    for (auto& in : inputs) vars.push_back(t.input(in));
    t.backward(build(t, vars));
    for (std::size_t i = 0; i < inputs.size(); ++i)
      input_targets.push_back({"input" + std::to_string(i), inputs[i], t.grad(vars[i])});
  }
  std::vector<nn::GradTarget> targets;
  model.visit([&](const std::string& n, nn::Parameter& p) {
    if (p.trainable) targets.push_back({n, p.value.span(), p.grad.vec()});
  });
  auto eval = [&] {
    nn::Tape t(false);
    std::vector<nn::Var> vars;
    for (auto& in : inputs) vars.push_back(t.constant(in));
    return build(t, vars).scalar();
  };
  const auto r = nn::gradient_check(eval, targets, opt);
  const auto ri = nn::gradient_check(eval, input_targets, input_opt);
  return {name, r.max_rel_error, ri.max_rel_error, r.checked + ri.checked,
          r.max_rel_error >= ri.max_rel_error ? r.worst : ri.worst};
}

inline std::vector<double> uniform(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

template <class Layer>
struct Single {
  Layer layer;
  template <class F>
  void visit(F&& f) {
    layer.visit("layer", f);
  }
};

struct ParamSet {
  std::vector<nn::Parameter*> params;
  template <class F>
  void visit(F&& f) {
    for (std::size_t i = 0; i < params.size(); ++i) f("p" + std::to_string(i), *params[i]);
  }
};

/// One result per layer type, each against a quadratic loss with a random target.
inline std::vector<CheckResult> layer_checks(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CheckResult> out;

  const nn::Activation acts[] = {nn::Activation::identity, nn::Activation::relu, nn::Activation::sigmoid,
                                 nn::Activation::tanh};
  const char* act_names[] = {"identity", "relu", "sigmoid", "tanh"};
  for (int a = 0; a < 4; ++a) {
    Single<nn::Linear> m{nn::Linear(7, 5, acts[a])};
    m.layer.init(rng);
    for (auto& b : m.layer.bias.value.span()) b = rng.uniform(-0.5, 0.5);
    std::vector<std::vector<double>> in{uniform(rng, 7)};
    const auto target = uniform(rng, 5);
    out.push_back(check(std::string("linear/") + act_names[a], m, in, [&](nn::Tape& t, std::vector<nn::Var>& v) {
      return nn::sum_squared_error(m.layer(t, v[0]), t.constant(target));
    }));
  }

  {
    nn::ConvGeometry g{8, 8, 2, 3, 3, 2, 1};
    Single<nn::Conv2d> m{nn::Conv2d(g)};
    m.layer.init(rng);
    for (auto& b : m.layer.bias.value.span()) b = rng.uniform(-0.5, 0.5);
    std::vector<std::vector<double>> in{uniform(rng, g.in_size())};
    const auto target = uniform(rng, g.out_size());
    out.push_back(check("conv2d", m, in, [&](nn::Tape& t, std::vector<nn::Var>& v) {
      return nn::sum_squared_error(m.layer(t, v[0]), t.constant(target));
    }));
  }

  {
    nn::ConvGeometry g{9, 7, 2, 4, 3, 2, 1};
    nn::Parameter kernel({static_cast<std::size_t>(g.kernel_size())});
    nn::Parameter bias({static_cast<std::size_t>(g.in_c)}, false);
    for (auto& k : kernel.value.span()) k = rng.uniform(-0.5, 0.5);
    for (auto& b : bias.value.span()) b = rng.uniform(-0.5, 0.5);
    ParamSet m{{&kernel, &bias}};
    std::vector<std::vector<double>> in{uniform(rng, g.out_size())};
    const auto target = uniform(rng, g.in_size());
    out.push_back(check("conv2d_transpose", m, in, [&](nn::Tape& t, std::vector<nn::Var>& v) {
      return nn::sum_squared_error(nn::conv2d_transpose(v[0], t.param(kernel), t.param(bias), g), t.constant(target));
    }));
  }

  {
    Single<nn::LstmCell> m{nn::LstmCell(4, 6)};
    m.layer.init(rng);
    for (auto& b : m.layer.bias.value.span()) b += rng.uniform(-0.5, 0.5);
    std::vector<std::vector<double>> in{uniform(rng, 4), uniform(rng, 6), uniform(rng, 6)};
    const auto target = uniform(rng, 12);
    out.push_back(check("lstm", m, in, [&](nn::Tape& t, std::vector<nn::Var>& v) {
      auto [h, c] = m.layer(t, v[0], v[1], v[2]);
      return nn::sum_squared_error(nn::concat({h, c}), t.constant(target));
    }));
  }

  {
    ParamSet none;
    std::vector<std::vector<double>> in{uniform(rng, 10), uniform(rng, 10)};
    out.push_back(check("mean_step_distance", none, in, [&](nn::Tape&, std::vector<nn::Var>& v) {
      return nn::mean_step_distance(v[0], v[1], 5);
    }));
  }

  {
    ParamSet none;
    std::vector<std::vector<double>> in{uniform(rng, 12)};
    const auto target = uniform(rng, 7);
    out.push_back(check("dropout/slice/concat", none, in, [&](nn::Tape& t, std::vector<nn::Var>& v) {
      Rng mask_rng(3);  // same mask on every evaluation
      nn::Var d = nn::dropout(v[0], 0.3, mask_rng, true);
      nn::Var s = nn::concat({nn::slice(d, 0, 4), nn::scale(nn::slice(d, 8, 3), -2.0)});
      return nn::add(nn::sum_squared_error(s, t.constant(target)), nn::sum_squares(nn::slice(v[0], 4, 4)));
    }));
  }
  return out;
}

/// Full predictor loss over a 3-step sub-sequence starting from a random hidden state.
/// Grid inputs are the frozen encoder's features of random binary grids, as in training.
inline CheckResult predictor_check(std::uint64_t seed, bool use_grid, std::size_t entries_per_tensor = 24) {
  pred::PredictorConfig cfg;
  cfg.use_grid = use_grid;
  pred::ModelParams m(cfg, seed);
  Rng rng(seed + 100);
  const int steps = 3;
  const std::size_t kh = m.horizon();
  const std::size_t grid_cells = use_grid ? static_cast<std::size_t>(cfg.grid_size() * cfg.grid_size()) : 0;
  if (use_grid)
    for (auto& c : m.grid_conv.convs)
      for (auto& b : c.bias.value.span()) b = rng.uniform(-0.1, 0.1);

  std::vector<std::vector<double>> in;
  const std::size_t hidden_sizes[4] = {pred::kVelocityHidden, pred::kApgHidden, use_grid ? pred::kGridHidden : 0,
                                       pred::kJointHidden};
  for (std::size_t s : hidden_sizes) in.push_back(uniform(rng, s, -0.5, 0.5));
  for (std::size_t s : hidden_sizes) in.push_back(uniform(rng, s, -0.5, 0.5));
  std::vector<std::vector<double>> targets;
  for (int k = 0; k < steps; ++k) {
    in.push_back(uniform(rng, 2, -1.5, 1.5));
    in.push_back(uniform(rng, static_cast<std::size_t>(cfg.apg_cones), 0.05, 1.0));
    std::vector<double> g(grid_cells);
    for (auto& c : g) c = rng.bernoulli(0.3) ? 1.0 : 0.0;
    in.push_back(use_grid ? m.grid_conv.features(g) : std::move(g));
    targets.push_back(uniform(rng, 2 * kh, -1.5, 1.5));
  }
  const double lambda = 1e-4;
  Build build = [&](nn::Tape& t, std::vector<nn::Var>& v) {
    pred::detail::HiddenVars h;
    for (std::size_t i = 0; i < 4; ++i) {
      h.h[i] = v[i];
      h.c[i] = v[4 + i];
    }
    std::vector<nn::Var> losses;
    for (int k = 0; k < steps; ++k) {
      const std::size_t base = 8 + 3 * static_cast<std::size_t>(k);
      nn::Var u = pred::detail::forward_step(m, t, v[base], v[base + 1], v[base + 2], h);
      losses.push_back(nn::mean_step_distance(u, t.constant(targets[static_cast<std::size_t>(k)]), kh));
    }
    nn::Var total = nn::sum(nn::concat(losses));
    return nn::add(total, nn::scale(pred::detail::l2_on_tape(m, t), lambda * steps));
  };
  nn::GradCheckOptions opt;
  opt.max_entries_per_tensor = entries_per_tensor;
  opt.seed = seed;
  // input entries can have near-cancelling gradients of order 1e-8, where the
  // central difference of an O(1) loss carries ~1e-11 rounding noise
  nn::GradCheckOptions input_opt = opt;
  input_opt.floor = 1e-6;
  return check(use_grid ? "predictor" : "predictor/noGrid", m, in, build, opt, input_opt);
}

}  // namespace pedpred::checks
