#pragma once

// Agent-centred model inputs: the heading-aligned local occupancy grid and the
// angular pedestrian grid (APG).

#include <algorithm>
#include <cmath>
#include <vector>

#include "pedpred/core.hpp"

namespace pedpred::enc {

/// Heading-aligned occupancy extract. Row i runs along the agent's x (forward) axis,
/// column j along its y (left) axis; cell (i, j) is stored at i * size + j.
struct LocalGrid {
  int size = 0;
  double resolution = 0.1;
  double extent = 6.0;
  std::vector<double> cells;

  double at(int i, int j) const { return cells[static_cast<std::size_t>(i) * size + j]; }

  /// Center of cell (i, j) in the agent frame.
  Vec2 cell_center(int i, int j) const {
    const double half = 0.5 * extent;
    return {(i + 0.5) * resolution - half, (j + 0.5) * resolution - half};
  }

  bool operator==(const LocalGrid&) const = default;
};

inline int grid_cells(double extent, double resolution) {
  const double n = extent / resolution;
  const double rounded = std::round(n);
  if (!(resolution > 0.0) || rounded < 1.0 || std::abs(n - rounded) > 1e-9 * std::max(1.0, n))
    throw InvalidArgument("local grid extent must be a positive integer multiple of its resolution");
  return static_cast<int>(rounded);
}

/// Nearest-neighbour extract of `map` around `agent`; cells off the map read as occupied.
inline LocalGrid extract_local_grid(const WorldMap& map, const AgentState& agent, double extent = 6.0,
                                    double resolution = 0.1) {
  LocalGrid g;
  g.size = grid_cells(extent, resolution);
  g.resolution = resolution;
  g.extent = extent;
  g.cells.resize(static_cast<std::size_t>(g.size) * g.size);
  const double c = std::cos(agent.heading);
  const double s = std::sin(agent.heading);
  for (int i = 0; i < g.size; ++i) {
    for (int j = 0; j < g.size; ++j) {
      const Vec2 local = g.cell_center(i, j);
      const Vec2 world{c * local.x - s * local.y + agent.position.x, s * local.x + c * local.y + agent.position.y};
      g.cells[static_cast<std::size_t>(i) * g.size + j] = map.occupied(world) ? 1.0 : 0.0;
    }
  }
  return g;
}

/// K distances (m), one per angular cone around the query agent, clipped at r_max.
struct ApgVector {
  int cones = 72;
  double r_max = 6.0;
  std::vector<double> values;

  /// Values scaled into (0, 1] for the network.
  std::vector<double> normalized() const {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [&](double v) { return v / r_max; });
    return out;
  }

  bool operator==(const ApgVector&) const = default;
};

// Coincident agents are pushed to this distance so every value stays positive.
constexpr double kMinApgDistance = 0.01;

/// Polar angle in [0, 2pi).
inline double polar_angle(const Vec2& local) {
  double phi = std::atan2(local.y, local.x);
  if (phi < 0.0) phi += kTwoPi;
  if (phi >= kTwoPi) phi -= kTwoPi;
  return phi;
}

/// Cone index k such that phi lies in [k * w, (k + 1) * w) with w = 2pi / cones.
inline int cone_index(double phi, int cones) {
  const double width = kTwoPi / cones;
  int k = static_cast<int>(std::floor(phi / width));
  k = std::clamp(k, 0, cones - 1);
  // floor of the quotient can disagree with the interval test by one ulp near a boundary
  if (k > 0 && phi < k * width) --k;
  if (k + 1 < cones && phi >= (k + 1) * width) ++k;
  return k;
}

inline ApgVector build_apg(const WorldState& world, int query_id, int cones = 72, double r_max = 6.0) {
  if (cones < 1) throw InvalidArgument("APG needs at least one cone");
  if (!(r_max > 0.0)) throw InvalidArgument("APG r_max must be positive");
  const AgentState* query = world.find(query_id);
  if (query == nullptr) throw InvalidArgument("build_apg: unknown query agent id " + std::to_string(query_id));

  ApgVector apg;
  apg.cones = cones;
  apg.r_max = r_max;
  apg.values.assign(static_cast<std::size_t>(cones), r_max);
  for (const auto& other : world.agents) {
    if (other.id == query_id) continue;
    const Vec2 local = world_to_agent_frame(other.position, *query);
    // distance from the unrotated offset; rotation only decides the cone
    const double rho = std::max(kMinApgDistance, distance(other.position, query->position));
    const int k = cone_index(polar_angle(local), cones);
    apg.values[static_cast<std::size_t>(k)] = std::min(apg.values[static_cast<std::size_t>(k)], rho);
  }
  return apg;
}

}  // namespace pedpred::enc
