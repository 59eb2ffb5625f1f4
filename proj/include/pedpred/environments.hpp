#pragma once

// Map builders for the simulated environments.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pedpred/core.hpp"
#include "pedpred/random.hpp"
#include "pedpred/simforces.hpp"

namespace pedpred::env {

inline int cells_for(double meters, double resolution) {
  return static_cast<int>(std::llround(meters / resolution));
}

inline WorldMap empty_map(double width_m, double height_m, double resolution, Vec2 origin = {}) {
  return WorldMap(origin, resolution, cells_for(width_m, resolution), cells_for(height_m, resolution));
}

/// Marks every cell whose center lies inside `r`.
inline void fill_rect(WorldMap& map, const sim::Rect& r) {
  for (int iy = 0; iy < map.height; ++iy)
    for (int ix = 0; ix < map.width; ++ix)
      if (r.contains(map.cell_center(ix, iy))) map.at(ix, iy) = 1;
}

inline void add_border(WorldMap& map, int thickness = 1) {
  for (int iy = 0; iy < map.height; ++iy)
    for (int ix = 0; ix < map.width; ++ix)
      if (ix < thickness || iy < thickness || ix >= map.width - thickness || iy >= map.height - thickness)
        map.at(ix, iy) = 1;
}

struct Environment {
  std::string name;
  WorldMap map;
  std::vector<sim::Rect> goal_regions;
};

/// Walled corridor along x; goals live in the two end zones.
inline Environment corridor(double length = 30.0, double width = 4.0, double resolution = 0.1,
                            double end_zone = 3.0) {
  Environment e;
  e.name = "corridor";
  e.map = empty_map(length, width, resolution);
  add_border(e.map);
  const double wall = resolution;
  e.goal_regions.push_back({{wall, wall}, {end_zone, width - wall}});
  e.goal_regions.push_back({{length - end_zone, wall}, {length - wall, width - wall}});
  return e;
}

/// Walled room with randomly placed rectangular obstacles.
inline Environment cluttered(double width = 20.0, double height = 20.0, int n_obstacles = 12,
                             std::uint64_t seed = 1, double resolution = 0.1) {
  Environment e;
  e.name = "cluttered-" + std::to_string(seed);
  e.map = empty_map(width, height, resolution);
  add_border(e.map);
  Rng rng(seed);
  const double margin = 1.5;
  for (int k = 0; k < n_obstacles; ++k) {
    const double w = rng.uniform(0.4, 2.5);
    const double h = rng.uniform(0.4, 2.5);
    const double x = rng.uniform(margin, width - margin - w);
    const double y = rng.uniform(margin, height - margin - h);
    fill_rect(e.map, {{x, y}, {x + w, y + h}});
  }
  return e;
}

}  // namespace pedpred::env
