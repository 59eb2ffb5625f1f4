#pragma once

// Social-forces crowd simulator: dataset generation and the dynamics behind the SF baseline.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "pedpred/core.hpp"
#include "pedpred/random.hpp"

namespace pedpred::sim {

class DegenerateGoal : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct SfParams {
  double desired_speed_mean = 1.34;  // m/s
  double desired_speed_std = 0.26;
  double desired_speed_min = 0.5;
  double desired_speed_max = 2.2;
  double relaxation_time = 0.5;  // tau, s
  double agent_repulsion_strength = 2.1;  // A, m/s^2
  double agent_repulsion_range = 0.3;  // B, m
  double obstacle_repulsion_strength = 10.0;
  double obstacle_repulsion_range = 0.2;
  double agent_radius = 0.3;
  double force_noise_std = 0.3;  // sigma, m/s^2
  double max_speed_factor = 1.3;  // max_speed = factor * desired_speed
  double goal_radius = 0.5;
  double obstacle_search_radius = 3.0;
  double goal_timeout = 40.0;  // s; a stuck agent gets a fresh goal after this long

  void validate() const {
    const double positive[] = {desired_speed_mean, desired_speed_std, desired_speed_min, desired_speed_max,
                               relaxation_time, agent_repulsion_strength, agent_repulsion_range,
                               obstacle_repulsion_strength, obstacle_repulsion_range, agent_radius,
                               max_speed_factor, goal_radius, obstacle_search_radius, goal_timeout};
    for (double v : positive)
      if (!(v > 0.0)) throw ConfigError("social-force parameters must be strictly positive");
    if (!(force_noise_std >= 0.0)) throw ConfigError("force noise std must be non-negative");
    if (desired_speed_min > desired_speed_max) throw ConfigError("desired speed range is empty");
  }
};

/// Axis-aligned rectangle in world coordinates.
struct Rect {
  Vec2 min;
  Vec2 max;
  double area() const { return (max.x - min.x) * (max.y - min.y); }
  bool contains(const Vec2& p) const { return p.x >= min.x && p.x < max.x && p.y >= min.y && p.y < max.y; }
};

struct SimConfig {
  double dt = 0.3;
  int n_agents = 20;
  double duration = 300.0;
  std::uint64_t rng_seed = 1;
  WorldMap environment;
  // Goals are drawn from these regions when non-empty, otherwise from the whole map.
  std::vector<Rect> goal_regions;

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("simulation dt must be positive");
    if (n_agents < 1) throw ConfigError("simulation needs at least one agent");
    if (!(duration >= 0.0)) throw ConfigError("simulation duration must be non-negative");
    if (!environment.valid()) throw ConfigError("simulation environment map is invalid");
  }
};

struct SimAgent {
  AgentState state;
  Vec2 goal;
  double desired_speed = 1.34;
  double goal_age = 0.0;  // s since the current goal was assigned

  double max_speed(const SfParams& p) const { return p.max_speed_factor * desired_speed; }
};

/// Nearest occupied cell center within `radius` of p (out-of-map cells count as occupied).
inline std::optional<Vec2> nearest_occupied_center(const WorldMap& map, const Vec2& p, double radius) {
  const double res = map.resolution;
  const int cx = map.cell_x(p.x);
  const int cy = map.cell_y(p.y);
  const int max_ring = static_cast<int>(std::ceil(radius / res)) + 1;
  double best = std::numeric_limits<double>::infinity();
  Vec2 best_center;
  auto consider = [&](int ix, int iy) {
    if (!map.occupied_cell(ix, iy)) return;
    const Vec2 c = map.cell_center(ix, iy);
    const double d = distance(p, c);
    if (d < best) {
      best = d;
      best_center = c;
    }
  };
  for (int r = 0; r <= max_ring; ++r) {
    // every center on ring r is at least (r - 0.5) * res from p
    if ((r - 0.5) * res > best) break;
    if (r == 0) {
      consider(cx, cy);
      continue;
    }
    for (int dx = -r; dx <= r; ++dx) {
      consider(cx + dx, cy - r);
      consider(cx + dx, cy + r);
    }
    for (int dy = -r + 1; dy <= r - 1; ++dy) {
      consider(cx - r, cy + dy);
      consider(cx + r, cy + dy);
    }
  }
  if (best <= radius) return best_center;
  return std::nullopt;
}

inline Vec2 goal_force(const SimAgent& agent, const SfParams& params) {
  const Vec2 to_goal = agent.goal - agent.state.position;
  const double dist = to_goal.norm();
  if (dist < 1e-6) throw DegenerateGoal("goal coincides with agent position; resample the goal");
  return (to_goal / dist * agent.desired_speed - agent.state.velocity) / params.relaxation_time;
}

inline Vec2 agent_repulsion(const SimAgent& agent, const std::vector<SimAgent>& others, const SfParams& params) {
  Vec2 f;
  for (const auto& o : others) {
    if (o.state.id == agent.state.id) continue;
    const Vec2 diff = agent.state.position - o.state.position;
    const double d = diff.norm();
    const Vec2 n = d > 0.0 ? diff / d : Vec2{1.0, 0.0};
    f += n * (params.agent_repulsion_strength *
              std::exp((2.0 * params.agent_radius - d) / params.agent_repulsion_range));
  }
  return f;
}

inline Vec2 obstacle_repulsion(const Vec2& position, const WorldMap& map, const SfParams& params) {
  const auto c = nearest_occupied_center(map, position, params.obstacle_search_radius);
  if (!c) return {};
  const Vec2 diff = position - *c;
  const double d = diff.norm();
  const Vec2 n = d > 0.0 ? diff / d : Vec2{1.0, 0.0};
  return n * (params.obstacle_repulsion_strength *
              std::exp((params.agent_radius - d) / params.obstacle_repulsion_range));
}

/// Deterministic social force on `agent`: goal attraction + agent and obstacle repulsion.
/// `others` may contain the agent itself; it is skipped by id.
inline Vec2 social_force(const SimAgent& agent, const std::vector<SimAgent>& others, const WorldMap& map,
                         const SfParams& params) {
  return goal_force(agent, params) + agent_repulsion(agent, others, params) +
         obstacle_repulsion(agent.state.position, map, params);
}

/// True if p is in a free cell and no in-map occupied cell within the checked neighborhood
/// comes closer than `clearance`.
inline bool has_clearance(const WorldMap& map, const Vec2& p, double clearance) {
  if (map.occupied(p)) return false;
  const double res = map.resolution;
  const int cx = map.cell_x(p.x);
  const int cy = map.cell_y(p.y);
  const int n = std::max(1, static_cast<int>(std::ceil(clearance / res)));
  for (int iy = cy - n; iy <= cy + n; ++iy) {
    for (int ix = cx - n; ix <= cx + n; ++ix) {
      if (!map.in_bounds(ix, iy) || map.at(ix, iy) == 0) continue;
      const double x0 = map.origin.x + ix * res;
      const double y0 = map.origin.y + iy * res;
      const double dx = std::max({x0 - p.x, 0.0, p.x - (x0 + res)});
      const double dy = std::max({y0 - p.y, 0.0, p.y - (y0 + res)});
      if (dx * dx + dy * dy < clearance * clearance) return false;
    }
  }
  return true;
}

constexpr int kMaxGoalSamples = 10000;

/// Uniform point that lies in a free cell with `clearance` from occupied cells.
inline Vec2 sample_goal(const WorldMap& map, Rng& rng, double clearance, const std::vector<Rect>& regions = {}) {
  if (map.width == 0 || map.height == 0) throw InvalidArgument("cannot sample a goal on an empty map");
  double total_area = 0.0;
  for (const auto& r : regions) total_area += r.area();
  for (int attempt = 0; attempt < kMaxGoalSamples; ++attempt) {
    Vec2 p;
    if (regions.empty() || !(total_area > 0.0)) {
      p = {rng.uniform(map.origin.x, map.origin.x + map.width_m()),
           rng.uniform(map.origin.y, map.origin.y + map.height_m())};
    } else {
      double pick = rng.uniform(0.0, total_area);
      const Rect* chosen = &regions.back();
      for (const auto& r : regions) {
        if (pick < r.area()) {
          chosen = &r;
          break;
        }
        pick -= r.area();
      }
      p = {rng.uniform(chosen->min.x, chosen->max.x), rng.uniform(chosen->min.y, chosen->max.y)};
    }
    if (has_clearance(map, p, clearance)) return p;
  }
  throw InvalidArgument("sample_goal: no admissible point after 10000 draws (map too cluttered)");
}

inline Vec2 sample_goal(const WorldMap& map, Rng& rng, const SfParams& params,
                        const std::vector<Rect>& regions = {}) {
  return sample_goal(map, rng, params.agent_radius, regions);
}

namespace detail {

// True if the straight segment a->b never enters an occupied cell.
inline bool segment_free(const WorldMap& map, const Vec2& a, const Vec2& b) {
  const double len = distance(a, b);
  const int n = std::max(1, static_cast<int>(std::ceil(len / (0.25 * map.resolution))));
  for (int k = 1; k <= n; ++k) {
    const double s = static_cast<double>(k) / n;
    if (map.occupied(a + (b - a) * s)) return false;
  }
  return true;
}

// Moves from p by `delta` unless that enters an obstacle; then slides along one axis or stays.
inline Vec2 guarded_move(const WorldMap& map, const Vec2& p, const Vec2& delta) {
  const Vec2 target = p + delta;
  if (segment_free(map, p, target)) return target;
  const Vec2 along_x = p + Vec2{delta.x, 0.0};
  const Vec2 along_y = p + Vec2{0.0, delta.y};
  const bool x_first = std::abs(delta.x) >= std::abs(delta.y);
  const Vec2 first = x_first ? along_x : along_y;
  const Vec2 second = x_first ? along_y : along_x;
  if (segment_free(map, p, first)) return first;
  if (segment_free(map, p, second)) return second;
  return p;
}

}  // namespace detail

struct StepOptions {
  bool resample_goals = true;  // false: agents brake on arrival and keep their goal
  std::vector<Rect> goal_regions;
};

/// One explicit-Euler tick of all agents (synchronous update).
inline std::vector<SimAgent> step(const std::vector<SimAgent>& world, const WorldMap& map, const SfParams& params,
                                  double dt, Rng& rng, const StepOptions& options = {}) {
  if (!(dt > 0.0)) throw InvalidArgument("step: dt must be positive");
  std::vector<SimAgent> next = world;
  for (std::size_t i = 0; i < world.size(); ++i) {
    const SimAgent& agent = world[i];
    SimAgent& out = next[i];

    Vec2 force;
    const double goal_dist = distance(agent.goal, agent.state.position);
    if (!options.resample_goals && goal_dist < params.goal_radius) {
      force = agent.state.velocity * (-1.0 / params.relaxation_time) + agent_repulsion(agent, world, params) +
              obstacle_repulsion(agent.state.position, map, params);
    } else {
      force = social_force(agent, world, map, params);
    }
    if (params.force_noise_std > 0.0) {
      const double nx = rng.normal(0.0, params.force_noise_std);
      const double ny = rng.normal(0.0, params.force_noise_std);
      force += Vec2{nx, ny};
    }

    Vec2 v = agent.state.velocity + force * dt;
    const double vmax = agent.max_speed(params);
    const double speed = v.norm();
    if (speed > vmax) v = v * (vmax / speed);

    const Vec2 p = detail::guarded_move(map, agent.state.position, v * dt);
    if (!(p == agent.state.position + v * dt)) v = (p - agent.state.position) / dt;

    out.state.position = p;
    out.state.velocity = v;
    out.state.heading = update_heading(agent.state.heading, v);
    out.goal_age = agent.goal_age + dt;

    if (options.resample_goals &&
        (distance(out.goal, p) < params.goal_radius || out.goal_age >= params.goal_timeout)) {
      out.goal = sample_goal(map, rng, params, options.goal_regions);
      out.goal_age = 0.0;
    }
  }
  return next;
}

inline double sample_desired_speed(Rng& rng, const SfParams& params) {
  for (int i = 0; i < 1000; ++i) {
    const double s = rng.normal(params.desired_speed_mean, params.desired_speed_std);
    if (s >= params.desired_speed_min && s <= params.desired_speed_max) return s;
  }
  return std::clamp(params.desired_speed_mean, params.desired_speed_min, params.desired_speed_max);
}

/// Places agents at free, mutually separated positions walking toward their first goal.
inline std::vector<SimAgent> spawn_agents(const SimConfig& config, const SfParams& params, Rng& rng) {
  std::vector<SimAgent> agents;
  agents.reserve(static_cast<std::size_t>(config.n_agents));
  for (int i = 0; i < config.n_agents; ++i) {
    SimAgent a;
    a.state.id = i;
    Vec2 p;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      p = sample_goal(config.environment, rng, params);
      bool separated = true;
      for (const auto& o : agents)
        if (distance(o.state.position, p) < 2.0 * params.agent_radius) separated = false;
      if (separated) break;
    }
    a.state.position = p;
    a.desired_speed = sample_desired_speed(rng, params);
    do {
      a.goal = sample_goal(config.environment, rng, params, config.goal_regions);
    } while (distance(a.goal, p) < params.goal_radius);
    const Vec2 dir = (a.goal - p) / distance(a.goal, p);
    a.state.velocity = dir * a.desired_speed;
    a.state.heading = update_heading(0.0, a.state.velocity);
    agents.push_back(a);
  }
  return agents;
}

/// Runs the simulator for duration/dt ticks and records one trajectory per agent.
inline Dataset generate_dataset(const SimConfig& config, const SfParams& params) {
  config.validate();
  params.validate();
  Rng rng(config.rng_seed);
  auto agents = spawn_agents(config, params, rng);
  const auto ticks = static_cast<std::int64_t>(std::llround(config.duration / config.dt));

  Dataset ds;
  ds.map = config.environment;
  ds.dt = config.dt;
  ds.trajectories.resize(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    auto& tr = ds.trajectories[i];
    tr.agent_id = agents[i].state.id;
    tr.start_index = 0;
    tr.dt = config.dt;
    tr.samples.reserve(static_cast<std::size_t>(ticks + 1));
    tr.samples.push_back(agents[i].state);
  }
  StepOptions options;
  options.goal_regions = config.goal_regions;
  for (std::int64_t k = 0; k < ticks; ++k) {
    agents = step(agents, config.environment, params, config.dt, rng, options);
    for (std::size_t i = 0; i < agents.size(); ++i) ds.trajectories[i].samples.push_back(agents[i].state);
  }
  return ds;
}

}  // namespace pedpred::sim
