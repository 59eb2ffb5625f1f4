#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pedpred/core.hpp"

namespace pedpred {

/// What a forecaster sees at one time index.
struct SceneQuery {
  const Dataset& dataset;
  std::int64_t time_index;
  const WorldState& scene;  // every agent present at time_index
  int horizon;
  double dt;
};

/// Receding-horizon predictor driven through a dataset one time index at a time.
/// forecast() is called with strictly increasing time indices after reset().
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::string name() const = 0;
  virtual void reset() {}
  /// World-frame positions for steps 1..horizon of every agent in the scene.
  virtual std::map<int, std::vector<Vec2>> forecast(const SceneQuery& q) = 0;
};

}  // namespace pedpred
