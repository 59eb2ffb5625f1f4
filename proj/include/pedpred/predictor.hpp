#pragma once

// Three-channel recurrent predictor: velocity, angular pedestrian grid and local
// occupancy grid are embedded and run through per-channel LSTMs, joined by a
// fourth LSTM and decoded into K_H future velocities in one pass.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pedpred/autoencoder.hpp"
#include "pedpred/core.hpp"
#include "pedpred/encoders.hpp"
#include "pedpred/forecaster.hpp"
#include "pedpred/nn/adam.hpp"
#include "pedpred/nn/layers.hpp"
#include "pedpred/random.hpp"

namespace pedpred::pred {

// layer widths
constexpr std::size_t kVelocityEmbed = 32;
constexpr std::size_t kVelocityHidden = 32;
constexpr std::size_t kApgEmbed = 128;
constexpr std::size_t kApgHidden = 64;
constexpr std::size_t kGridEmbed = 64;
constexpr std::size_t kGridHidden = 64;
constexpr std::size_t kJointHidden = 128;
constexpr std::size_t kHeadWidth = 64;

struct PredictorConfig {
  int horizon = 10;  // K_H
  double dt = 0.3;
  int trunc = 10;  // d_trunc
  double grid_extent = 6.0;
  double grid_resolution = 0.1;
  int apg_cones = 72;
  double apg_range = 6.0;
  bool use_grid = true;

  int grid_size() const { return enc::grid_cells(grid_extent, grid_resolution); }

  void validate() const {
    if (horizon < 1) throw ConfigError("prediction horizon must be at least 1");
    if (trunc < 1) throw ConfigError("truncation depth must be at least 1");
    if (!(dt > 0.0)) throw ConfigError("predictor dt must be positive");
    if (apg_cones < 1 || !(apg_range > 0.0)) throw ConfigError("invalid APG configuration");
    try {
      (void)grid_size();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
};

/// Recurrent memory of one prediction session. The grid state is empty without a grid channel.
struct PredictorHidden {
  nn::LstmState velocity;
  nn::LstmState apg;
  nn::LstmState grid;
  nn::LstmState joint;

  bool operator==(const PredictorHidden&) const = default;

  bool all_zero() const {
    for (const auto* s : {&velocity, &apg, &grid, &joint}) {
      for (double v : s->h)
        if (v != 0.0) return false;
      for (double v : s->c)
        if (v != 0.0) return false;
    }
    return true;
  }
};

struct PredictionInput {
  Vec2 velocity_local;
  enc::LocalGrid grid;
  enc::ApgVector apg;
};

struct ModelParams {
  PredictorConfig config;
  nn::Linear velocity_embed;
  nn::LstmCell velocity_lstm;
  nn::Linear apg_embed;
  nn::LstmCell apg_lstm;
  ae::ConvStack grid_conv;  // frozen copy of the pretrained encoder
  nn::Linear grid_fc;
  nn::LstmCell grid_lstm;
  nn::LstmCell joint_lstm;
  nn::Linear head_fc;
  nn::Linear head_out;

  ModelParams() = default;

  /// Randomly initialised model; the conv stack is random too unless replaced by load_encoder().
  explicit ModelParams(const PredictorConfig& cfg, std::uint64_t seed = 1) : config(cfg) {
    cfg.validate();
    const auto k = static_cast<std::size_t>(cfg.apg_cones);
    velocity_embed = nn::Linear(2, kVelocityEmbed, nn::Activation::relu);
    velocity_lstm = nn::LstmCell(kVelocityEmbed, kVelocityHidden);
    apg_embed = nn::Linear(k, kApgEmbed, nn::Activation::relu);
    apg_lstm = nn::LstmCell(kApgEmbed, kApgHidden);
    std::size_t joint_in = kVelocityHidden + kApgHidden;
    if (cfg.use_grid) {
      grid_conv = ae::ConvStack(cfg.grid_size());
      grid_fc = nn::Linear(grid_conv.feature_size(), kGridEmbed, nn::Activation::identity);
      grid_lstm = nn::LstmCell(kGridEmbed, kGridHidden);
      joint_in += kGridHidden;
    }
    joint_lstm = nn::LstmCell(joint_in, kJointHidden);
    head_fc = nn::Linear(kJointHidden, kHeadWidth, nn::Activation::relu);
    head_out = nn::Linear(kHeadWidth, 2 * static_cast<std::size_t>(cfg.horizon), nn::Activation::identity);

    Rng rng(seed);
    velocity_embed.init(rng);
    velocity_lstm.init(rng);
    apg_embed.init(rng);
    apg_lstm.init(rng);
    if (cfg.use_grid) {
      grid_conv.init(rng);
      grid_conv.set_trainable(false);
      grid_fc.init(rng);
      grid_lstm.init(rng);
    }
    joint_lstm.init(rng);
    head_fc.init(rng);
    head_out.init(rng);
  }

  bool use_grid() const { return config.use_grid; }
  std::size_t horizon() const { return static_cast<std::size_t>(config.horizon); }
  std::size_t grid_feature_size() const { return use_grid() ? grid_conv.feature_size() : 0; }

  template <class F>
  void visit(F&& f) {
    velocity_embed.visit("velocity.embed", f);
    velocity_lstm.visit("velocity.lstm", f);
    apg_embed.visit("apg.embed", f);
    apg_lstm.visit("apg.lstm", f);
    if (use_grid()) {
      grid_conv.visit("grid", f);
      grid_fc.visit("grid.fc", f);
      grid_lstm.visit("grid.lstm", f);
    }
    joint_lstm.visit("joint.lstm", f);
    head_fc.visit("head.fc", f);
    head_out.visit("head.out", f);
  }

  /// Installs a pretrained encoder: conv weights frozen, grid FC initialised from the AE FC.
  void load_encoder(const ae::ConvAutoencoder& ae) {
    if (!use_grid()) throw InvalidArgument("model has no grid channel");
    if (ae.grid_size() != grid_conv.grid_size())
      throw ShapeError("autoencoder grid size " + std::to_string(ae.grid_size()) + " does not match predictor grid " +
                       std::to_string(grid_conv.grid_size()));
    grid_conv = ae.encoder;
    grid_conv.set_trainable(false);
    grid_fc.weight.value = ae.encoder_fc.weight.value;
    grid_fc.bias.value = ae.encoder_fc.bias.value;
    nn::zero_grads(*this);
  }
};

inline PredictorHidden init_session(const ModelParams& m) {
  PredictorHidden h;
  h.velocity = nn::LstmState::zeros(kVelocityHidden);
  h.apg = nn::LstmState::zeros(kApgHidden);
  if (m.use_grid()) h.grid = nn::LstmState::zeros(kGridHidden);
  h.joint = nn::LstmState::zeros(kJointHidden);
  return h;
}

/// Network inputs of one timestep, already encoded. `grid` holds the frozen conv features.
struct StepFeatures {
  std::array<double, 2> velocity{};
  std::vector<double> apg;   // normalised distances
  std::vector<double> grid;  // empty without a grid channel
};

inline StepFeatures features_of(const ModelParams& m, const PredictionInput& in) {
  if (in.apg.values.size() != static_cast<std::size_t>(m.config.apg_cones))
    throw ShapeError("APG has " + std::to_string(in.apg.values.size()) + " cones, model expects " +
                     std::to_string(m.config.apg_cones));
  StepFeatures f;
  f.velocity = {in.velocity_local.x, in.velocity_local.y};
  f.apg = in.apg.normalized();
  if (m.use_grid()) {
    const int n = m.grid_conv.grid_size();
    if (in.grid.size != n || in.grid.cells.size() != static_cast<std::size_t>(n) * n)
      throw ShapeError("local grid must be " + std::to_string(n) + "x" + std::to_string(n));
    f.grid = m.grid_conv.features(in.grid.cells);
  }
  return f;
}

/// Builds the query agent's inputs from a scene snapshot.
inline PredictionInput make_input(const WorldState& scene, const WorldMap& map, int query_id,
                                  const PredictorConfig& cfg) {
  const AgentState* a = scene.find(query_id);
  if (a == nullptr) throw InvalidArgument("make_input: unknown agent id " + std::to_string(query_id));
  PredictionInput in;
  in.velocity_local = rotate(a->velocity, -a->heading);
  if (cfg.use_grid) in.grid = enc::extract_local_grid(map, *a, cfg.grid_extent, cfg.grid_resolution);
  in.apg = enc::build_apg(scene, query_id, cfg.apg_cones, cfg.apg_range);
  return in;
}

namespace detail {

struct HiddenVars {
  std::array<nn::Var, 4> h;  // velocity, apg, grid, joint
  std::array<nn::Var, 4> c;
};

inline HiddenVars hidden_on_tape(nn::Tape& t, const PredictorHidden& s) {
  HiddenVars v;
  const nn::LstmState* states[4] = {&s.velocity, &s.apg, &s.grid, &s.joint};
  for (std::size_t i = 0; i < 4; ++i) {
    v.h[i] = t.constant(states[i]->h);
    v.c[i] = t.constant(states[i]->c);
  }
  return v;
}

inline PredictorHidden hidden_values(const HiddenVars& v, bool has_grid) {
  auto state = [&](std::size_t i) {
    return nn::LstmState{nn::detail::copy(v.h[i].value()), nn::detail::copy(v.c[i].value())};
  };
  PredictorHidden s;
  s.velocity = state(0);
  s.apg = state(1);
  if (has_grid) s.grid = state(2);
  s.joint = state(3);
  return s;
}

inline HiddenVars detach(nn::Tape& t, const HiddenVars& v) {
  HiddenVars out;
  for (std::size_t i = 0; i < 4; ++i) {
    out.h[i] = t.detach(v.h[i]);
    out.c[i] = t.detach(v.c[i]);
  }
  return out;
}

struct DropoutCtx {
  double p = 0.0;
  Rng* rng = nullptr;
};

inline nn::Var drop(nn::Var x, const DropoutCtx* d) {
  if (d == nullptr || d->rng == nullptr || d->p <= 0.0) return x;
  return nn::dropout(x, d->p, *d->rng, true);
}

/// One forward step on the tape. Inputs enter as tape leaves so tests can differentiate w.r.t. them.
template <class M>
nn::Var forward_step(M& m, nn::Tape& t, nn::Var velocity, nn::Var apg, nn::Var grid, HiddenVars& h,
                     const DropoutCtx* d = nullptr) {
  std::vector<nn::Var> joint_in;
  {
    nn::Var e = drop(m.velocity_embed(t, velocity), d);
    std::tie(h.h[0], h.c[0]) = m.velocity_lstm(t, e, h.h[0], h.c[0]);
    joint_in.push_back(h.h[0]);
  }
  {
    nn::Var e = drop(m.apg_embed(t, apg), d);
    std::tie(h.h[1], h.c[1]) = m.apg_lstm(t, e, h.h[1], h.c[1]);
    joint_in.push_back(h.h[1]);
  }
  if (m.use_grid()) {
    nn::Var e = drop(m.grid_fc(t, grid), d);
    std::tie(h.h[2], h.c[2]) = m.grid_lstm(t, e, h.h[2], h.c[2]);
    joint_in.push_back(h.h[2]);
  }
  std::tie(h.h[3], h.c[3]) = m.joint_lstm(t, nn::concat(joint_in), h.h[3], h.c[3]);
  nn::Var z = drop(m.head_fc(t, h.h[3]), d);
  return m.head_out(t, z);
}

inline void check_features(const ModelParams& m, const StepFeatures& f) {
  if (f.apg.size() != static_cast<std::size_t>(m.config.apg_cones)) throw ShapeError("APG feature size mismatch");
  if (f.grid.size() != m.grid_feature_size()) throw ShapeError("grid feature size mismatch");
}

/// L2 penalty over trainable weight matrices, recorded on the tape.
template <class M>
nn::Var l2_on_tape(M& m, nn::Tape& t) {
  std::vector<nn::Var> terms;
  m.visit([&](const std::string&, nn::Parameter& p) {
    if (p.trainable && p.is_weight) terms.push_back(nn::sum_squares(t.param(p)));
  });
  nn::Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = nn::add(acc, terms[i]);
  return acc;
}

}  // namespace detail

struct PredictionOutput {
  std::vector<Vec2> velocities;  // agent frame at query time
  PredictorHidden hidden;
};

inline PredictionOutput predict_features(const ModelParams& m, const StepFeatures& f, const PredictorHidden& hidden) {
  detail::check_features(m, f);
  if (hidden.velocity.h.size() != kVelocityHidden || hidden.joint.h.size() != kJointHidden ||
      hidden.grid.h.size() != (m.use_grid() ? kGridHidden : 0))
    throw ShapeError("hidden state does not belong to this model");
  nn::Tape t(false);
  auto h = detail::hidden_on_tape(t, hidden);
  nn::Var out = detail::forward_step(m, t, t.constant(std::span<const double>(f.velocity)), t.constant(f.apg),
                                     t.constant(f.grid), h);
  auto u = out.value();
  PredictionOutput r;
  r.velocities.resize(m.horizon());
  for (std::size_t l = 0; l < m.horizon(); ++l) r.velocities[l] = {u[2 * l], u[2 * l + 1]};
  r.hidden = detail::hidden_values(h, m.use_grid());
  return r;
}

/// Single forward pass: all K_H velocities plus the updated hidden state.
inline PredictionOutput predict(const ModelParams& m, const PredictionInput& in, const PredictorHidden& hidden) {
  return predict_features(m, features_of(m, in), hidden);
}

/// Euler integration from the agent's position, velocities rotated by the query-time heading.
inline std::vector<Vec2> integrate(const std::vector<Vec2>& velocities, const AgentState& agent, double dt) {
  std::vector<Vec2> out;
  out.reserve(velocities.size());
  Vec2 p = agent.position;
  for (const auto& v : velocities) {
    p += rotate(v, agent.heading) * dt;
    out.push_back(p);
  }
  return out;
}

/// Sum of squares of every weight matrix (biases excluded).
template <class M>
double l2_penalty(M& m) {
  double acc = 0.0;
  m.visit([&](const std::string&, nn::Parameter& p) {
    if (!p.trainable || !p.is_weight) return;
    for (double v : p.value.span()) acc += v * v;
  });
  return acc;
}

/// (1/K_H) sum_l ||u_l - v_l|| + lambda * L2(weights)
inline double training_loss(const std::vector<Vec2>& u, const std::vector<Vec2>& v_gt, ModelParams& m,
                            double lambda) {
  if (u.size() != v_gt.size()) throw ShapeError("training_loss: sequences differ in length");
  if (u.empty()) throw ShapeError("training_loss: empty sequences");
  double acc = 0.0;
  for (std::size_t l = 0; l < u.size(); ++l) acc += (u[l] - v_gt[l]).norm();
  acc /= static_cast<double>(u.size());
  return lambda == 0.0 ? acc : acc + lambda * l2_penalty(m);
}

// Training data

struct TrainingStep {
  StepFeatures features;
  std::vector<double> target;  // K_H interleaved (x, y) velocities, agent frame at this step
};

struct TrainingSequence {
  int agent_id = 0;
  std::vector<TrainingStep> steps;
};

/// Turns every trajectory into encoded steps with K_H-step targets. Steps whose target
/// window would cross the end of the trajectory are dropped. Target velocities are the
/// successive displacements divided by dt, so integrating them reproduces the positions.
inline std::vector<TrainingSequence> prepare_sequences(const Dataset& ds, const ModelParams& m) {
  const auto& cfg = m.config;
  if (std::abs(ds.dt - cfg.dt) > 1e-12) throw InvalidArgument("dataset dt differs from predictor dt");
  const std::size_t kh = m.horizon();
  std::unordered_map<std::int64_t, WorldState> scenes;
  auto scene = [&](std::int64_t t) -> const WorldState& {
    auto it = scenes.find(t);
    if (it == scenes.end()) it = scenes.emplace(t, ds.scene_at(t)).first;
    return it->second;
  };
  std::vector<TrainingSequence> out;
  for (const auto& tr : ds.trajectories) {
    if (tr.samples.size() <= kh) continue;
    TrainingSequence seq;
    seq.agent_id = tr.agent_id;
    const std::size_t n = tr.samples.size() - kh;
    seq.steps.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const AgentState& a = tr.samples[k];
      TrainingStep s;
      s.features = features_of(m, make_input(scene(tr.start_index + static_cast<std::int64_t>(k)), ds.map, a.id, cfg));
      s.target.resize(2 * kh);
      for (std::size_t l = 0; l < kh; ++l) {
        const Vec2 v = (tr.samples[k + l + 1].position - tr.samples[k + l].position) / ds.dt;
        const Vec2 local = rotate(v, -a.heading);
        s.target[2 * l] = local.x;
        s.target[2 * l + 1] = local.y;
      }
      seq.steps.push_back(std::move(s));
    }
    out.push_back(std::move(seq));
  }
  if (out.empty())
    throw InvalidArgument("no trajectory is long enough to supply " + std::to_string(kh) + "-step targets");
  return out;
}

struct TrainConfig {
  int steps = 1000;  // Adam updates
  int streams = 8;   // sub-sequences per update, each from its own trajectory stream
  nn::AdamConfig adam{};
  double l2 = 1e-4;
  double dropout = 0.2;
  std::uint64_t seed = 1;
  int log_every = 100;
  std::function<void(int step, double mean_step_error)> on_log;

  void validate() const {
    if (steps < 0 || streams < 1) throw ConfigError("train: invalid step or stream count");
    if (!(l2 >= 0.0)) throw ConfigError("train: l2 must be non-negative");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train: dropout must lie in [0, 1)");
  }
};

/// Truncated-BPTT trainer. Each stream walks one trajectory in consecutive sub-sequences of
/// length d_trunc, carrying hidden values across boundaries; the next trajectory starts from zeros.
class Trainer {
 public:
  Trainer(ModelParams& model, TrainConfig cfg) : model_(model), cfg_(std::move(cfg)), adam_(cfg_.adam), rng_(cfg_.seed) {
    cfg_.validate();
  }

  ModelParams& model() { return model_; }
  const std::vector<double>& curve() const { return curve_; }
  long updates() const { return adam_.steps(); }

  /// Runs `steps` updates over `data` (cfg.steps when negative). Returns the mean step error of the last update.
  double fit(const std::vector<TrainingSequence>& data, int steps = -1) {
    if (data.empty()) throw InvalidArgument("train: no sequences");
    if (steps < 0) steps = cfg_.steps;
    order_.clear();
    cursor_ = 0;
    streams_.assign(static_cast<std::size_t>(cfg_.streams), Stream{});
    const std::size_t trunc = static_cast<std::size_t>(model_.config.trunc);
    for (std::size_t j = 0; j < streams_.size(); ++j) {
      Stream& s = streams_[j];
      start_next(s, data);
      // spread the streams' first sub-sequences over their trajectories
      const std::size_t subs = (data[s.seq].steps.size() + trunc - 1) / trunc;
      s.pos = (j * subs / streams_.size()) * trunc;
    }
    nn::zero_grads(model_);
    double last = 0.0;
    for (int step = 1; step <= steps; ++step) {
      double err = 0.0;
      std::size_t count = 0;
      for (auto& s : streams_) {
        const auto [e, n] = run_stream(s, data);
        err += e;
        count += n;
      }
      adam_.step(model_);
      last = err / static_cast<double>(std::max<std::size_t>(1, count));
      const long global = adam_.steps();
      if (cfg_.log_every > 0 && (global % cfg_.log_every == 0 || global == 1)) {
        curve_.push_back(last);
        if (cfg_.on_log) cfg_.on_log(static_cast<int>(global), last);
      }
    }
    return last;
  }

 private:
  struct Stream {
    std::size_t seq = 0;
    std::size_t pos = 0;
    PredictorHidden hidden;
  };

  void start_next(Stream& s, const std::vector<TrainingSequence>& data) {
    if (cursor_ == order_.size()) {
      order_.resize(data.size());
      for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
      std::shuffle(order_.begin(), order_.end(), rng_.engine());
      cursor_ = 0;
    }
    s.seq = order_[cursor_++];
    s.pos = 0;
    s.hidden = init_session(model_);
  }

  // One sub-sequence; gradients accumulate into the model. Returns (sum of step errors, steps).
  std::pair<double, std::size_t> run_stream(Stream& s, const std::vector<TrainingSequence>& data) {
    const auto& seq = data[s.seq].steps;
    const std::size_t n = std::min(static_cast<std::size_t>(model_.config.trunc), seq.size() - s.pos);
    nn::Tape t(true);
    auto h = detail::hidden_on_tape(t, s.hidden);
    detail::DropoutCtx drop{cfg_.dropout, &rng_};
    std::vector<nn::Var> losses;
    double err = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& st = seq[s.pos + k];
      nn::Var u = detail::forward_step(model_, t, t.constant(std::span<const double>(st.features.velocity)),
                                       t.constant(st.features.apg), t.constant(st.features.grid), h, &drop);
      nn::Var l = nn::mean_step_distance(u, t.constant(st.target), model_.horizon());
      err += l.scalar();
      losses.push_back(l);
    }
    nn::Var total = nn::sum(nn::concat(losses));
    if (cfg_.l2 > 0.0) total = nn::add(total, nn::scale(detail::l2_on_tape(model_, t), cfg_.l2 * n));
    t.backward(nn::scale(total, 1.0 / static_cast<double>(streams_.size())));
    s.hidden = detail::hidden_values(h, model_.use_grid());
    s.pos += n;
    if (s.pos >= seq.size()) start_next(s, data);
    return {err, n};
  }

  ModelParams& model_;
  TrainConfig cfg_;
  nn::Adam adam_;
  Rng rng_;
  std::vector<Stream> streams_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::vector<double> curve_;
};

/// Model initialised from a pretrained autoencoder (when the grid channel is enabled).
inline ModelParams make_model(const PredictorConfig& cfg, const ae::ConvAutoencoder* ae, std::uint64_t seed) {
  ModelParams m(cfg, seed);
  if (cfg.use_grid) {
    if (ae == nullptr) throw InvalidArgument("grid channel needs a pretrained autoencoder");
    m.load_encoder(*ae);
  }
  return m;
}

/// Single-stage training on one dataset.
inline ModelParams train(const Dataset& ds, const ae::ConvAutoencoder& ae, const PredictorConfig& cfg,
                         const TrainConfig& hyper) {
  ModelParams m = make_model(cfg, &ae, hyper.seed);
  Trainer trainer(m, hyper);
  trainer.fit(prepare_sequences(ds, m));
  return m;
}

/// Receding-horizon adapter: one hidden session per agent, zeroed when the agent first appears
/// and discarded once it leaves the scene.
class LstmForecaster : public Forecaster {
 public:
  explicit LstmForecaster(const ModelParams& m, std::string label = "lstm") : m_(m), label_(std::move(label)) {}

  std::string name() const override { return label_; }
  void reset() override { sessions_.clear(); }

  std::map<int, std::vector<Vec2>> forecast(const SceneQuery& q) override {
    if (static_cast<std::size_t>(q.horizon) != m_.horizon()) throw InvalidArgument("forecast horizon differs from model");
    std::map<int, std::vector<Vec2>> out;
    std::unordered_map<int, PredictorHidden> next;
    for (const auto& a : q.scene.agents) {
      auto it = sessions_.find(a.id);
      const PredictorHidden h = it == sessions_.end() ? init_session(m_) : std::move(it->second);
      auto r = predict(m_, make_input(q.scene, q.dataset.map, a.id, m_.config), h);
      out.emplace(a.id, integrate(r.velocities, a, q.dt));
      next.emplace(a.id, std::move(r.hidden));
    }
    sessions_ = std::move(next);
    return out;
  }

  std::size_t session_count() const { return sessions_.size(); }

 private:
  const ModelParams& m_;
  std::string label_;
  std::unordered_map<int, PredictorHidden> sessions_;
};

}  // namespace pedpred::pred
