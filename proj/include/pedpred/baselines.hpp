#pragma once

// Constant-velocity, constant-acceleration and social-forces comparison predictors.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "pedpred/core.hpp"
#include "pedpred/forecaster.hpp"
#include "pedpred/random.hpp"
#include "pedpred/simforces.hpp"

namespace pedpred::baseline {

/// Time-ordered recent samples of one agent.
struct ObservedHistory {
  std::vector<AgentState> samples;
  double dt = 0.3;
};

/// p_k = p0 + k dt v0
inline std::vector<Vec2> predict_cv(const AgentState& state, int horizon, double dt) {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(std::max(horizon, 0)));
  for (int k = 1; k <= horizon; ++k) out.push_back(state.position + state.velocity * (k * dt));
  return out;
}

/// Acceleration from the last two velocities, then v_k = v0 + k dt a and p_k = p_{k-1} + dt v_k.
inline std::vector<Vec2> predict_cacc(const ObservedHistory& history, int horizon, double dt) {
  if (history.samples.size() < 2) throw InvalidArgument("constant-acceleration prediction needs two samples");
  if (!(history.dt > 0.0)) throw InvalidArgument("history dt must be positive");
  const AgentState& now = history.samples.back();
  const AgentState& prev = history.samples[history.samples.size() - 2];
  const Vec2 a = (now.velocity - prev.velocity) / history.dt;
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(std::max(horizon, 0)));
  Vec2 p = now.position;
  for (int k = 1; k <= horizon; ++k) {
    const Vec2 v = now.velocity + a * (k * dt);
    p += v * dt;
    out.push_back(p);
  }
  return out;
}

/// Noise-free joint social-forces rollout toward fixed destinations. Each agent's desired
/// speed is its current speed clamped to the simulator's desired-speed range.
inline std::map<int, std::vector<Vec2>> predict_sf(const WorldState& world, const WorldMap& map,
                                                   const std::map<int, Vec2>& destinations, int horizon, double dt,
                                                   sim::SfParams params) {
  params.force_noise_std = 0.0;
  params.validate();
  std::vector<sim::SimAgent> agents;
  agents.reserve(world.agents.size());
  for (const auto& a : world.agents) {
    auto it = destinations.find(a.id);
    if (it == destinations.end()) throw InvalidArgument("predict_sf: no destination for agent " + std::to_string(a.id));
    sim::SimAgent s;
    s.state = a;
    s.goal = it->second;
    s.desired_speed = std::clamp(a.velocity.norm(), params.desired_speed_min, params.desired_speed_max);
    agents.push_back(s);
  }
  sim::StepOptions opts;
  opts.resample_goals = false;
  Rng unused(0);
  std::map<int, std::vector<Vec2>> out;
  for (const auto& a : agents) out[a.state.id].reserve(static_cast<std::size_t>(std::max(horizon, 0)));
  for (int k = 0; k < horizon; ++k) {
    agents = sim::step(agents, map, params, dt, unused, opts);
    for (const auto& a : agents) out[a.state.id].push_back(a.state.position);
  }
  return out;
}

class CvForecaster : public Forecaster {
 public:
  std::string name() const override { return "cv"; }
  std::map<int, std::vector<Vec2>> forecast(const SceneQuery& q) override {
    std::map<int, std::vector<Vec2>> out;
    for (const auto& a : q.scene.agents) out.emplace(a.id, predict_cv(a, q.horizon, q.dt));
    return out;
  }
};

/// Uses the agent's previous dataset sample; an agent seen for the first time falls back to CV.
class CaccForecaster : public Forecaster {
 public:
  std::string name() const override { return "cacc"; }
  std::map<int, std::vector<Vec2>> forecast(const SceneQuery& q) override {
    std::map<int, std::vector<Vec2>> out;
    for (const auto& a : q.scene.agents) {
      const Trajectory* tr = q.dataset.find(a.id);
      if (tr != nullptr && tr->covers(q.time_index - 1)) {
        ObservedHistory h{{tr->at_time(q.time_index - 1), a}, q.dataset.dt};
        out.emplace(a.id, predict_cacc(h, q.horizon, q.dt));
      } else {
        out.emplace(a.id, predict_cv(a, q.horizon, q.dt));
      }
    }
    return out;
  }
};

/// Destination of each agent is the final sample of its full trajectory.
class SfForecaster : public Forecaster {
 public:
  explicit SfForecaster(sim::SfParams params = {}) : params_(params) {}
  std::string name() const override { return "sf"; }
  std::map<int, std::vector<Vec2>> forecast(const SceneQuery& q) override {
    std::map<int, Vec2> dest;
    for (const auto& a : q.scene.agents) {
      const Trajectory* tr = q.dataset.find(a.id);
      dest[a.id] = tr != nullptr && !tr->samples.empty() ? tr->samples.back().position : a.position;
    }
    return predict_sf(q.scene, q.dataset.map, dest, q.horizon, q.dt, params_);
  }

 private:
  sim::SfParams params_;
};

}  // namespace pedpred::baseline
