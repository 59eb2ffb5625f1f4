#include <gtest/gtest.h>

#include <cmath>

#include "gradchecks.hpp"
#include "oracles.hpp"
#include "pedpred/nn/adam.hpp"
#include "pedpred/nn/gradcheck.hpp"
#include "pedpred/nn/layers.hpp"

using namespace pedpred;
using namespace pedpred::nn;

namespace {

void fill_uniform(Tensor& t, Rng& rng, double s = 1.0) {
  for (auto& v : t.span()) v = rng.uniform(-s, s);
}

}  // namespace

TEST(Tensor, ShapeChecks) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t(1, 2), 1.5);
  EXPECT_TRUE(t.all_finite());
  t[0] = NAN;
  EXPECT_FALSE(t.all_finite());
}

TEST(Linear, IdentityWeights) {
  Linear l(2, 2);
  l.weight.value(0, 0) = 1.0;
  l.weight.value(1, 1) = 1.0;
  const Tensor y = fc_forward(l, Tensor({2}, {1.0, 2.0}));
  EXPECT_EQ(y[0], 1.0);
  EXPECT_EQ(y[1], 2.0);
}

TEST(Linear, ZeroWeightsGiveBias) {
  Linear l(4, 1);
  l.bias.value[0] = 3.0;
  EXPECT_EQ(fc_forward(l, Tensor({4}, {5, -2, 7, 1}))[0], 3.0);
}

TEST(Linear, MatchesOracle) {
  Rng rng(7);
  Linear l(13, 9);
  fill_uniform(l.weight.value, rng);
  fill_uniform(l.bias.value, rng);
  Tensor x({13});
  fill_uniform(x, rng);
  EXPECT_LT(oracle::max_abs_diff(fc_forward(l, x).vec(), oracle::fc(l.weight.value, l.bias.value, x.vec())), 1e-12);
}

TEST(Linear, ShapeMismatchThrows) {
  Linear l(3, 2);
  EXPECT_THROW(fc_forward(l, Tensor({4})), ShapeError);
}

TEST(Conv2d, UnitKernelIsIdentity) {
  Conv2d c(ConvGeometry{5, 4, 1, 1, 1, 1, 0});
  c.kernel.value[0] = 1.0;
  Rng rng(1);
  Tensor x({5, 4, 1});
  fill_uniform(x, rng);
  EXPECT_EQ(conv2d_forward(c, x).vec(), x.vec());
}

TEST(Conv2d, ZeroKernelGivesZeros) {
  Conv2d c(ConvGeometry{6, 6, 2, 3, 3, 1, 1});
  Tensor x({6, 6, 2}, 1.0);
  const Tensor y = conv2d_forward(c, x);
  for (double v : y.vec()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, OutputSize) {
  ConvGeometry g{60, 60, 1, 8, 5, 2, 2};
  EXPECT_EQ(g.out_h(), 30);
  ConvGeometry h{8, 8, 1, 1, 3, 2, 0};
  EXPECT_EQ(h.out_h(), 3);
  EXPECT_THROW((ConvGeometry{2, 2, 1, 1, 5, 1, 0}.validate()), ShapeError);
}

TEST(Conv2d, MatchesOracle) {
  Rng rng(11);
  for (const ConvGeometry& g : {ConvGeometry{8, 8, 1, 1, 3, 2, 0}, ConvGeometry{8, 8, 1, 4, 3, 2, 1},
                                ConvGeometry{9, 7, 3, 5, 5, 2, 2}}) {
    Conv2d c(g);
    fill_uniform(c.kernel.value, rng);
    fill_uniform(c.bias.value, rng);
    Tensor x({static_cast<std::size_t>(g.in_h), static_cast<std::size_t>(g.in_w), static_cast<std::size_t>(g.in_c)});
    fill_uniform(x, rng);
    EXPECT_LT(oracle::max_abs_diff(conv2d_forward(c, x).vec(), oracle::conv(g, c.kernel.value, c.bias.value, x.vec())),
              1e-12);
  }
}

TEST(Lstm, ZeroParametersKeepZeroState) {
  LstmCell cell(3, 2);
  auto [h, s] = lstm_step(cell, Tensor({3}, {0.4, -1.0, 2.0}), LstmState::zeros(2));
  for (double v : s.h) EXPECT_EQ(v, 0.0);
  for (double v : s.c) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(h.vec(), s.h);
}

TEST(Lstm, HandEvaluatedGates) {
  LstmCell cell(1, 1);
  LstmState st{{0.0}, {1.0}};
  auto [h, s] = lstm_step(cell, Tensor({1}, {0.7}), st);
  // i = f = o = 0.5, g = 0
  EXPECT_DOUBLE_EQ(s.c[0], 0.5);
  EXPECT_DOUBLE_EQ(s.h[0], 0.5 * std::tanh(0.5));
  EXPECT_NEAR(s.h[0], 0.231, 5e-4);
}

TEST(Lstm, MatchesOracle) {
  Rng rng(13);
  LstmCell cell(5, 4);
  fill_uniform(cell.weight.value, rng);
  fill_uniform(cell.bias.value, rng);
  Tensor x({5});
  fill_uniform(x, rng);
  LstmState st{{0.1, -0.3, 0.5, 0.2}, {-1.0, 0.4, 0.9, -0.2}};
  const auto ref = oracle::lstm(cell.weight.value, cell.bias.value, x.vec(), st);
  const auto [h, s] = lstm_step(cell, x, st);
  EXPECT_LT(oracle::max_abs_diff(s.h, ref.h), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(s.c, ref.c), 1e-12);
}

TEST(Lstm, ForgetBiasInitialisedToOne) {
  Rng rng(1);
  LstmCell cell(3, 4);
  cell.init(rng);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(cell.bias.value[k], 0.0);
    EXPECT_EQ(cell.bias.value[4 + k], 1.0);
  }
}

TEST(Backward, ScalarParameterHasUnitGradient) {
  Parameter p({1});
  p.value[0] = 2.5;
  Tape t;
  t.backward(t.param(p));
  EXPECT_EQ(p.grad[0], 1.0);
}

TEST(Backward, SumOfLinearGivesInputRows) {
  Linear l(3, 4);
  Rng rng(2);
  l.init(rng);
  const std::vector<double> x{0.5, -1.0, 2.0};
  Tape t;
  t.backward(sum(l(t, t.constant(x))));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(l.weight.grad(r, c), x[c]);
  for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(l.bias.grad[r], 1.0);
}

TEST(Backward, GradientsAccumulateAcrossTapes) {
  Parameter p({1});
  for (int i = 0; i < 3; ++i) {
    Tape t;
    t.backward(scale(t.param(p), 2.0));
  }
  EXPECT_EQ(p.grad[0], 6.0);
}

TEST(Backward, Errors) {
  Tape a;
  Tape b;
  Var x = a.input({1.0});
  EXPECT_THROW(b.backward(x), InvalidArgument);
  Var v = a.input({1.0, 2.0});
  EXPECT_THROW(a.backward(v), ShapeError);
  a.backward(sum(v));
  EXPECT_THROW(a.backward(sum(v)), InvalidArgument);
}

TEST(Backward, DetachCutsGradient) {
  Tape t;
  Var x = t.input({3.0});
  Var y = add(scale(x, 2.0), t.detach(scale(x, 5.0)));
  t.backward(y);
  EXPECT_EQ(t.grad(x)[0], 2.0);
}

TEST(Backward, FrozenParameterGetsNoGradient) {
  Parameter p({2});
  p.value[0] = 1.0;
  p.trainable = false;
  Tape t;
  Var x = t.input({1.0, 1.0});
  t.backward(sum_squared_error(x, t.param(p)));
  EXPECT_EQ(p.grad[0], 0.0);
  EXPECT_EQ(p.grad[1], 0.0);
  EXPECT_EQ(t.grad(x)[1], 2.0);
}

TEST(Dropout, IdentityOutsideTraining) {
  Tape t(false);
  Rng rng(3);
  Var x = t.constant(std::vector<double>{1, 2, 3});
  Var y = dropout(x, 0.5, rng, false);
  EXPECT_EQ(y.id, x.id);
}

TEST(Dropout, KeepsExpectationAndZeroesAboutP) {
  Tape t(false);
  Rng rng(3);
  Var x = t.constant(std::vector<double>(20000, 1.0));
  auto y = dropout(x, 0.2, rng, true).value();
  double sum = 0.0;
  std::size_t zeros = 0;
  for (double v : y) {
    sum += v;
    zeros += v == 0.0;
  }
  EXPECT_NEAR(sum / 20000.0, 1.0, 0.02);
  EXPECT_NEAR(zeros / 20000.0, 0.2, 0.01);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> w{1.0, -2.0}, g{0.0, 0.0}, m(2), v(2);
  adam_update(w, g, m, v, AdamConfig{}, 1);
  EXPECT_EQ(w[0], 1.0);
  EXPECT_EQ(w[1], -2.0);
}

TEST(Adam, FirstStepIsLrTimesSign) {
  std::vector<double> w{1.0, -2.0, 0.5}, g{0.3, -4.0, 1e-3}, m(3), v(3);
  AdamConfig cfg;
  adam_update(w, g, m, v, cfg, 1);
  EXPECT_NEAR(w[0], 1.0 - 1e-3, 1e-10);
  EXPECT_NEAR(w[1], -2.0 + 1e-3, 1e-10);
  EXPECT_NEAR(w[2], 0.5 - 1e-3, 1e-7);
}

TEST(Adam, QuadraticLossDecreases) {
  Parameter p({1});
  p.value[0] = 10.0;
  checks::ParamSet model{{&p}};
  Adam adam(AdamConfig{0.05});
  double prev = INFINITY;
  for (int i = 0; i < 100; ++i) {
    Tape t;
    Var l = sum_squares(t.param(p));
    const double loss = l.scalar();
    EXPECT_LT(loss, prev);
    prev = loss;
    t.backward(l);
    adam.step(model);
  }
  EXPECT_EQ(adam.steps(), 100);
}

TEST(Adam, StepCounterStartsAtOne) {
  std::vector<double> w{1.0}, g{1.0}, m(1), v(1);
  EXPECT_THROW(adam_update(w, g, m, v, AdamConfig{}, 0), InvalidArgument);
}

TEST(GradCheck, RelativeErrorDefinition) {
  EXPECT_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1.0, 3.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-12), 1e-4);
}

TEST(GradCheck, LinearLayerIsTight) {
  const auto results = checks::layer_checks(21);
  ASSERT_EQ(results.front().name, "linear/identity");
  EXPECT_LT(results.front().error, 1e-7);
}

TEST(GradCheck, EveryLayerType) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto& r : checks::layer_checks(seed)) {
      EXPECT_LT(r.error, 1e-4) << r.name << " seed " << seed;
      EXPECT_LT(r.input_error, 1e-4) << r.name << " seed " << seed;
      EXPECT_GT(r.entries, 0u) << r.name;
    }
  }
}

TEST(GradCheck, DetectsWrongGradient) {
  Parameter p({3});
  p.value[0] = 1.0;
  std::vector<GradTarget> targets{{"p", p.value.span(), {2.0, 0.0, 0.0}}};
  auto loss = [&] { return 3.0 * p.value[0] * p.value[0]; };  // true gradient 6
  EXPECT_GT(gradient_check(loss, targets).max_rel_error, 0.4);
}

TEST(GradCheck, PredictorLoss) {
  for (bool grid : {true, false}) {
    const auto r = checks::predictor_check(5, grid);
    EXPECT_LT(r.error, 1e-3) << r.name << " " << r.worst;
    EXPECT_LT(r.input_error, 1e-3) << r.name << " " << r.worst;
  }
}

TEST(Params, ExportImportRoundTrip) {
  Rng rng(4);
  checks::Single<Linear> a{Linear(3, 2)};
  a.layer.init(rng);
  checks::Single<Linear> b{Linear(3, 2)};
  import_params(b, export_params(a));
  EXPECT_EQ(a.layer.weight.value, b.layer.weight.value);
  checks::Single<Linear> c{Linear(4, 2)};
  EXPECT_THROW(import_params(c, export_params(a)), ShapeError);
  EXPECT_EQ(parameter_count(a), 8u);
}
