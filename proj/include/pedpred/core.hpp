#pragma once

// Shared geometry, agent/world state and frame transforms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace pedpred {

// Error hierarchy. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class InvalidArgument : public Error {
 public:
  using Error::Error;
};
class ShapeError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class NumericError : public Error {
 public:
  using Error::Error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
  constexpr double squared_norm() const { return x * x + y * y; }
  constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
};

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Below this speed (m/s) the heading is held instead of following the velocity.
constexpr double kHeadingSpeedEps = 0.05;

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  double w = std::fmod(a + kPi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  w -= kPi;
  // fmod can round up to exactly +pi for inputs just below an odd multiple of pi.
  if (w >= kPi) w -= kTwoPi;
  return w;
}

/// Heading from velocity, or the previous heading when the agent is (nearly) stationary.
inline double update_heading(double previous_heading, const Vec2& velocity) {
  if (velocity.norm() > kHeadingSpeedEps) return wrap_angle(std::atan2(velocity.y, velocity.x));
  return previous_heading;
}

/// Position, velocity and heading of one pedestrian at one timestep (world frame).
struct AgentState {
  int id = 0;
  Vec2 position;
  Vec2 velocity;
  double heading = 0.0;

  bool operator==(const AgentState&) const = default;
};

/// All agents visible at one time index. Agent ids are unique.
struct WorldState {
  std::int64_t time_index = 0;
  std::vector<AgentState> agents;

  const AgentState* find(int id) const {
    for (const auto& a : agents)
      if (a.id == id) return &a;
    return nullptr;
  }

  bool ids_unique() const {
    std::unordered_set<int> seen;
    for (const auto& a : agents)
      if (!seen.insert(a.id).second) return false;
    return true;
  }
};

inline Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Expresses a world point in the agent's frame: origin at its position, x-axis along its heading.
inline Vec2 world_to_agent_frame(const Vec2& p_world, const AgentState& agent) {
  return rotate(p_world - agent.position, -agent.heading);
}

/// Inverse of world_to_agent_frame.
inline Vec2 agent_to_world_frame(const Vec2& p_local, const AgentState& agent) {
  return rotate(p_local, agent.heading) + agent.position;
}

/// Global static occupancy grid. Cell (ix, iy) covers
/// [origin.x + ix*res, origin.x + (ix+1)*res) x [origin.y + iy*res, ...), stored row-major by iy.
struct WorldMap {
  Vec2 origin;
  double resolution = 0.1;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;

  WorldMap() = default;
  WorldMap(Vec2 origin_, double resolution_, int width_, int height_)
      : origin(origin_), resolution(resolution_), width(width_), height(height_) {
    if (!(resolution_ > 0.0)) throw InvalidArgument("map resolution must be positive");
    if (width_ < 0 || height_ < 0) throw InvalidArgument("map size must be non-negative");
    cells.assign(static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_), 0);
  }

  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width && iy < height; }

  std::uint8_t& at(int ix, int iy) { return cells[static_cast<std::size_t>(iy) * width + ix]; }
  std::uint8_t at(int ix, int iy) const { return cells[static_cast<std::size_t>(iy) * width + ix]; }

  int cell_x(double x) const { return static_cast<int>(std::floor((x - origin.x) / resolution)); }
  int cell_y(double y) const { return static_cast<int>(std::floor((y - origin.y) / resolution)); }

  Vec2 cell_center(int ix, int iy) const {
    return {origin.x + (ix + 0.5) * resolution, origin.y + (iy + 0.5) * resolution};
  }

  /// Cells outside the map count as occupied.
  bool occupied_cell(int ix, int iy) const { return !in_bounds(ix, iy) || at(ix, iy) != 0; }

  bool occupied(const Vec2& p) const { return occupied_cell(cell_x(p.x), cell_y(p.y)); }

  double width_m() const { return width * resolution; }
  double height_m() const { return height * resolution; }

  std::size_t free_cell_count() const {
    return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{0}));
  }

  bool valid() const {
    if (!(resolution > 0.0)) return false;
    if (cells.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) return false;
    return std::all_of(cells.begin(), cells.end(), [](std::uint8_t c) { return c <= 1; });
  }

  bool operator==(const WorldMap&) const = default;
};

/// Time-ordered samples of one agent; sample k sits at time index start_index + k.
struct Trajectory {
  int agent_id = 0;
  std::int64_t start_index = 0;
  double dt = 0.3;
  std::vector<AgentState> samples;

  std::int64_t end_index() const { return start_index + static_cast<std::int64_t>(samples.size()); }
  bool covers(std::int64_t t) const { return t >= start_index && t < end_index(); }
  const AgentState& at_time(std::int64_t t) const { return samples.at(static_cast<std::size_t>(t - start_index)); }

  bool operator==(const Trajectory&) const = default;
};

/// Per-agent trajectories sharing a map and sampling period.
struct Dataset {
  WorldMap map;
  std::vector<Trajectory> trajectories;
  double dt = 0.3;

  std::int64_t first_index() const {
    std::int64_t t = 0;
    bool any = false;
    for (const auto& tr : trajectories) {
      if (tr.samples.empty()) continue;
      t = any ? std::min(t, tr.start_index) : tr.start_index;
      any = true;
    }
    return t;
  }

  std::int64_t last_index() const {
    std::int64_t t = -1;
    for (const auto& tr : trajectories)
      if (!tr.samples.empty()) t = std::max(t, tr.end_index() - 1);
    return t;
  }

  /// All agents present at time index t, in trajectory order.
  WorldState scene_at(std::int64_t t) const {
    WorldState ws;
    ws.time_index = t;
    for (const auto& tr : trajectories)
      if (tr.covers(t)) ws.agents.push_back(tr.at_time(t));
    return ws;
  }

  const Trajectory* find(int agent_id) const {
    for (const auto& tr : trajectories)
      if (tr.agent_id == agent_id) return &tr;
    return nullptr;
  }

  std::size_t sample_count() const {
    std::size_t n = 0;
    for (const auto& tr : trajectories) n += tr.samples.size();
    return n;
  }

  void validate() const {
    if (!(dt > 0.0)) throw InvalidArgument("dataset dt must be positive");
    for (const auto& tr : trajectories)
      if (tr.dt != dt) throw InvalidArgument("trajectory dt differs from dataset dt");
  }

  bool operator==(const Dataset&) const = default;
};

/// Recomputes headings along a trajectory from its velocities.
inline void derive_headings(Trajectory& tr) {
  double heading = 0.0;
  for (auto& s : tr.samples) {
    heading = update_heading(heading, s.velocity);
    s.heading = heading;
  }
}

}  // namespace pedpred
