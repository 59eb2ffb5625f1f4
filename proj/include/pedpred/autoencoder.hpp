#pragma once

// Convolutional autoencoder for local occupancy grids. The decoder's transposed
// convolutions reuse the encoder kernels; only their biases are separate.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pedpred/core.hpp"
#include "pedpred/encoders.hpp"
#include "pedpred/nn/adam.hpp"
#include "pedpred/nn/layers.hpp"
#include "pedpred/random.hpp"

namespace pedpred::ae {

constexpr std::size_t kLatentSize = 64;

/// Encoder geometry for a square grid of `grid_size` cells:
/// 5x5x8 /2 -> 5x5x16 /2 -> 3x3x32 /2.
inline std::array<nn::ConvGeometry, 3> encoder_geometry(int grid_size) {
  nn::ConvGeometry g1{grid_size, grid_size, 1, 8, 5, 2, 2};
  nn::ConvGeometry g2{g1.out_h(), g1.out_w(), 8, 16, 5, 2, 2};
  nn::ConvGeometry g3{g2.out_h(), g2.out_w(), 16, 32, 3, 2, 1};
  return {g1, g2, g3};
}

/// Frozen-or-trainable convolutional feature extractor shared with the predictor.
struct ConvStack {
  std::array<nn::Conv2d, 3> convs;

  ConvStack() = default;
  explicit ConvStack(int grid_size) {
    auto g = encoder_geometry(grid_size);
    for (std::size_t i = 0; i < 3; ++i) convs[i] = nn::Conv2d(g[i]);
  }

  int grid_size() const { return convs[0].geometry.in_h; }
  std::size_t feature_size() const { return convs[2].geometry.out_size(); }

  void init(Rng& rng) {
    for (auto& c : convs) c.init(rng);
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < 3; ++i) convs[i].visit(prefix + ".conv" + std::to_string(i + 1), f);
  }

  void set_trainable(bool on) {
    for (auto& c : convs) c.kernel.trainable = c.bias.trainable = on;
  }

  template <class Self>
  static nn::Var apply(Self& self, nn::Tape& t, nn::Var grid) {
    nn::Var x = grid;
    for (auto& c : self.convs) x = nn::relu(c(t, x));
    return x;
  }
  nn::Var operator()(nn::Tape& t, nn::Var grid) { return apply(*this, t, grid); }
  nn::Var operator()(nn::Tape& t, nn::Var grid) const { return apply(*this, t, grid); }

  /// Flattened features of one grid without recording gradients.
  std::vector<double> features(std::span<const double> grid) const {
    nn::Tape t(false);
    return nn::detail::copy((*this)(t, t.constant(grid)).value());
  }
};

struct ConvAutoencoder {
  ConvStack encoder;
  nn::Linear encoder_fc;
  nn::Linear decoder_fc;
  // biases of the tied transposed convolutions, innermost first
  std::array<nn::Parameter, 3> decoder_bias;

  ConvAutoencoder() = default;
  explicit ConvAutoencoder(int grid_size, std::uint64_t seed = 1) : encoder(grid_size) {
    const std::size_t feat = encoder.feature_size();
    encoder_fc = nn::Linear(feat, kLatentSize, nn::Activation::identity);
    decoder_fc = nn::Linear(kLatentSize, feat, nn::Activation::relu);
    for (std::size_t i = 0; i < 3; ++i)
      decoder_bias[i] = nn::Parameter({static_cast<std::size_t>(encoder.convs[i].geometry.in_c)}, false);
    // He-uniform scaling
    Rng rng(seed);
    for (auto& c : encoder.convs) nn::init_uniform(c.kernel.value, std::sqrt(6.0 / c.geometry.patch()), rng);
    nn::init_uniform(encoder_fc.weight.value, std::sqrt(3.0 / static_cast<double>(feat)), rng);
    nn::init_uniform(decoder_fc.weight.value, std::sqrt(6.0 / static_cast<double>(kLatentSize)), rng);
  }

  int grid_size() const { return encoder.grid_size(); }

  template <class F>
  void visit(F&& f) {
    encoder.visit("encoder", f);
    encoder_fc.visit("encoder.fc", f);
    decoder_fc.visit("decoder.fc", f);
    for (std::size_t i = 0; i < 3; ++i) f("decoder.tconv" + std::to_string(i + 1) + ".bias", decoder_bias[i]);
  }

  template <class Self>
  static nn::Var encode_on(Self& self, nn::Tape& t, nn::Var grid) {
    return self.encoder_fc(t, self.encoder(t, grid));
  }

  /// Decoder: FC -> three tied transposed convs (tanh, tanh, sigmoid).
  template <class Self>
  static nn::Var decode_on(Self& self, nn::Tape& t, nn::Var latent) {
    nn::Var x = self.decoder_fc(t, latent);
    for (int i = 2; i >= 0; --i) {
      const auto& conv = self.encoder.convs[static_cast<std::size_t>(i)];
      x = nn::conv2d_transpose(x, t.param(conv.kernel), t.param(self.decoder_bias[static_cast<std::size_t>(i)]),
                               conv.geometry);
      x = i > 0 ? nn::tanh(x) : nn::sigmoid(x);
    }
    return x;
  }

  nn::Var encode(nn::Tape& t, nn::Var grid) { return encode_on(*this, t, grid); }
  nn::Var decode(nn::Tape& t, nn::Var latent) { return decode_on(*this, t, latent); }
  nn::Var encode(nn::Tape& t, nn::Var grid) const { return encode_on(*this, t, grid); }
  nn::Var decode(nn::Tape& t, nn::Var latent) const { return decode_on(*this, t, latent); }
};

/// sum over all cells of (g_in - g_out)^2
inline double ae_loss(std::span<const double> g_in, std::span<const double> g_out) {
  if (g_in.size() != g_out.size()) throw ShapeError("ae_loss: grids differ in size");
  double acc = 0.0;
  for (std::size_t i = 0; i < g_in.size(); ++i) {
    const double d = g_in[i] - g_out[i];
    acc += d * d;
  }
  return acc;
}

inline void check_grid(const ConvAutoencoder& ae, const enc::LocalGrid& grid) {
  if (grid.size != ae.grid_size() || grid.cells.size() != static_cast<std::size_t>(grid.size) * grid.size)
    throw ShapeError("autoencoder expects a " + std::to_string(ae.grid_size()) + "x" +
                     std::to_string(ae.grid_size()) + " grid");
}

inline std::vector<double> encode(const ConvAutoencoder& ae, const enc::LocalGrid& grid) {
  check_grid(ae, grid);
  nn::Tape t(false);
  return nn::detail::copy(ae.encode(t, t.constant(grid.cells)).value());
}

/// Reconstruction in [0, 1], laid out like LocalGrid::cells.
inline std::vector<double> decode(const ConvAutoencoder& ae, std::span<const double> latent) {
  if (latent.size() != kLatentSize) throw ShapeError("decode: latent must have 64 entries");
  nn::Tape t(false);
  return nn::detail::copy(ae.decode(t, t.constant(latent)).value());
}

inline std::vector<double> reconstruct(const ConvAutoencoder& ae, const enc::LocalGrid& grid) {
  return decode(ae, encode(ae, grid));
}

inline double mean_loss(const ConvAutoencoder& ae, const std::vector<enc::LocalGrid>& grids) {
  if (grids.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& g : grids) acc += ae_loss(g.cells, reconstruct(ae, g));
  return acc / static_cast<double>(grids.size());
}

struct PretrainConfig {
  int steps = 2000;  // Adam updates
  int batch = 4;
  nn::AdamConfig adam{};
  std::uint64_t seed = 1;
  int log_every = 100;
  std::function<void(int step, double batch_loss)> on_log;
};

struct PretrainResult {
  ConvAutoencoder params;
  std::vector<double> curve;  // mean batch loss per logged step
};

/// Adam minimisation of the reconstruction loss, averaged over each minibatch.
inline PretrainResult pretrain(const std::vector<enc::LocalGrid>& grids, const PretrainConfig& cfg,
                               ConvAutoencoder initial) {
  if (grids.empty()) throw InvalidArgument("pretrain needs at least one grid");
  if (cfg.steps < 0 || cfg.batch < 1) throw ConfigError("pretrain: invalid step or batch count");
  for (const auto& g : grids) check_grid(initial, g);
  PretrainResult result{std::move(initial), {}};
  ConvAutoencoder& ae = result.params;
  ae.encoder.set_trainable(true);
  nn::Adam adam(cfg.adam);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(grids.size());
  std::size_t cursor = order.size();
  nn::zero_grads(ae);
  for (int step = 1; step <= cfg.steps; ++step) {
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng.engine());
        cursor = 0;
      }
      const auto& g = grids[order[cursor++]];
      nn::Tape t(true);
      nn::Var in = t.constant(g.cells);
      nn::Var loss = nn::scale(nn::sum_squared_error(ae.decode(t, ae.encode(t, in)), in), 1.0 / cfg.batch);
      batch_loss += loss.scalar();
      t.backward(loss);
    }
    adam.step(ae);
    if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step == 1)) {
      result.curve.push_back(batch_loss);
      if (cfg.on_log) cfg.on_log(step, batch_loss);
    }
  }
  return result;
}

inline PretrainResult pretrain(const std::vector<enc::LocalGrid>& grids, const PretrainConfig& cfg) {
  if (grids.empty()) throw InvalidArgument("pretrain needs at least one grid");
  return pretrain(grids, cfg, ConvAutoencoder(grids.front().size, cfg.seed));
}

/// Local grids at poses drawn uniformly from the dataset's samples.
inline std::vector<enc::LocalGrid> harvest_grids(const Dataset& ds, std::size_t count, std::uint64_t seed,
                                                 double extent = 6.0, double resolution = 0.1) {
  std::vector<std::pair<std::size_t, std::size_t>> poses;
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i)
    for (std::size_t k = 0; k < ds.trajectories[i].samples.size(); ++k) poses.emplace_back(i, k);
  if (poses.empty()) throw InvalidArgument("harvest_grids: dataset has no samples");
  Rng rng(seed);
  std::vector<enc::LocalGrid> grids;
  grids.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const auto [i, k] = poses[rng.index(poses.size())];
    grids.push_back(enc::extract_local_grid(ds.map, ds.trajectories[i].samples[k], extent, resolution));
  }
  return grids;
}

}  // namespace pedpred::ae
