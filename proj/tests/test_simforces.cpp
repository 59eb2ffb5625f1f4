#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "pedpred/environments.hpp"
#include "pedpred/simforces.hpp"
#include "test_util.hpp"

using namespace pedpred;
using namespace pedpred::sim;

namespace {

SimAgent make_agent(int id, Vec2 p, Vec2 v, Vec2 goal, double desired) {
  SimAgent a;
  a.state.id = id;
  a.state.position = p;
  a.state.velocity = v;
  a.state.heading = update_heading(0.0, v);
  a.goal = goal;
  a.desired_speed = desired;
  return a;
}

// 40 m square with nothing in it; the agent stays > 3 m from the edge in these tests.
WorldMap open_field() { return fixtures::free_map(40.0, 40.0, 0.1, {-20.0, -20.0}); }

}  // namespace

TEST(SocialForce, GoalAttractionFromRest) {
  SfParams p;
  p.relaxation_time = 0.5;
  const auto a = make_agent(0, {0, 0}, {0, 0}, {10, 0}, 1.0);
  const Vec2 f = social_force(a, {a}, open_field(), p);
  EXPECT_NEAR(f.x, 2.0, 1e-12);
  EXPECT_NEAR(f.y, 0.0, 1e-12);
}

TEST(SocialForce, EquilibriumIsForceFree) {
  SfParams p;
  const auto a = make_agent(0, {0, 0}, {1.3, 0}, {15, 0}, 1.3);
  const Vec2 f = social_force(a, {a}, open_field(), p);
  EXPECT_LT(f.norm(), 1e-9);
}

TEST(SocialForce, AgentRepulsionClosedForm) {
  SfParams p;
  const auto a = make_agent(0, {0, 0}, {0, 0}, {0, 10}, 1.0);
  const auto b = make_agent(1, {1, 0}, {0, 0}, {0, 10}, 1.0);
  const Vec2 f = agent_repulsion(a, {a, b}, p);
  const double expected = 2.1 * std::exp((0.6 - 1.0) / 0.3);
  EXPECT_NEAR(f.x, -expected, 1e-12);
  EXPECT_NEAR(f.y, 0.0, 1e-15);
  EXPECT_NEAR(expected, 0.5534, 1e-3);
}

TEST(SocialForce, ObstacleRepulsionPointsAway) {
  SfParams p;
  WorldMap m = open_field();
  m.at(m.cell_x(1.05), m.cell_y(0.05)) = 1;  // cell centred at (1.05, 0.05)
  const Vec2 f = obstacle_repulsion({0.05, 0.05}, m, p);
  EXPECT_NEAR(f.x, -10.0 * std::exp((0.3 - 1.0) / 0.2), 1e-9);
  EXPECT_NEAR(f.y, 0.0, 1e-9);
  // beyond the search radius nothing is felt
  EXPECT_EQ(obstacle_repulsion({-5.0, 0.05}, m, p).norm(), 0.0);
}

TEST(SocialForce, DegenerateGoalIsReported) {
  const auto a = make_agent(0, {1, 1}, {0, 0}, {1, 1}, 1.0);
  EXPECT_THROW(social_force(a, {a}, open_field(), SfParams{}), DegenerateGoal);
}

TEST(Step, EquilibriumAdvancesPositionOnly) {
  SfParams p;
  p.force_noise_std = 0.0;
  Rng rng(1);
  const auto a = make_agent(0, {0, 0}, {1.2, 0}, {15, 0}, 1.2);
  const auto next = step({a}, open_field(), p, 0.3, rng);
  EXPECT_NEAR(next[0].state.position.x, 0.36, 1e-12);
  EXPECT_EQ(next[0].state.position.y, 0.0);
  EXPECT_NEAR(next[0].state.velocity.x, 1.2, 1e-12);
  EXPECT_EQ(next[0].state.heading, 0.0);
}

TEST(Step, ExplicitEulerFromRest) {
  SfParams p;
  p.force_noise_std = 0.0;
  Rng rng(1);
  // desired 1.0, tau 0.5 -> force (2, 0)
  const auto a = make_agent(0, {0, 0}, {0, 0}, {10, 0}, 1.0);
  const auto next = step({a}, open_field(), p, 0.3, rng);
  EXPECT_NEAR(next[0].state.velocity.x, 0.6, 1e-12);
  EXPECT_NEAR(next[0].state.position.x, 0.18, 1e-12);
}

TEST(Step, SpeedIsClamped) {
  SfParams p;
  p.force_noise_std = 0.0;
  Rng rng(1);
  const auto a = make_agent(0, {0, 0}, {5.0, 0}, {10, 0}, 1.0);
  const auto next = step({a}, open_field(), p, 0.3, rng);
  EXPECT_NEAR(next[0].state.velocity.norm(), 1.3, 1e-12);
}

TEST(Step, NoiseCalibration) {
  SfParams p;
  const WorldMap m = open_field();
  const auto a = make_agent(0, {0, 0}, {1.34, 0}, {1000, 0}, 1.34);
  Rng rng(99);
  const int n = 10000;
  double sx = 0, sxx = 0, sy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    const auto next = step({a}, m, p, 0.3, rng);
    const Vec2 acc = (next[0].state.velocity - a.state.velocity) / 0.3 - social_force(a, {a}, m, p);
    sx += acc.x;
    sxx += acc.x * acc.x;
    sy += acc.y;
    syy += acc.y * acc.y;
  }
  const double stdx = std::sqrt(sxx / n - (sx / n) * (sx / n));
  const double stdy = std::sqrt(syy / n - (sy / n) * (sy / n));
  EXPECT_NEAR(stdx, 0.3, 0.015);
  EXPECT_NEAR(stdy, 0.3, 0.015);
}

TEST(Step, ArrivalResamplesGoal) {
  SfParams p;
  p.force_noise_std = 0.0;
  Rng rng(4);
  const WorldMap m = open_field();
  const auto a = make_agent(0, {0, 0}, {1.0, 0}, {0.4, 0}, 1.0);
  const auto next = step({a}, m, p, 0.3, rng);
  EXPECT_FALSE(next[0].goal == a.goal);
  EXPECT_TRUE(has_clearance(m, next[0].goal, p.agent_radius));
  StepOptions keep;
  keep.resample_goals = false;
  const auto held = step({a}, m, p, 0.3, rng, keep);
  EXPECT_TRUE(held[0].goal == a.goal);
}

TEST(SampleGoal, FreeMapDrawsAreFree) {
  Rng rng(2);
  const WorldMap m = fixtures::free_map(5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 g = sample_goal(m, rng, 0.3);
    EXPECT_FALSE(m.occupied(g));
  }
}

TEST(SampleGoal, SingleFreeCell) {
  WorldMap m = fixtures::free_map(1.0, 1.0);
  for (auto& c : m.cells) c = 1;
  m.at(4, 6) = 0;
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const Vec2 g = sample_goal(m, rng, 0.0);
    EXPECT_EQ(m.cell_x(g.x), 4);
    EXPECT_EQ(m.cell_y(g.y), 6);
  }
}

TEST(SampleGoal, FailsOnFullMap) {
  WorldMap m = fixtures::free_map(1.0, 1.0);
  for (auto& c : m.cells) c = 1;
  Rng rng(5);
  EXPECT_THROW(sample_goal(m, rng, 0.3), InvalidArgument);
}

TEST(SampleGoal, CorridorCoverage) {
  const auto env = env::corridor();
  Rng rng(8);
  std::set<std::pair<int, int>> hit;
  for (int i = 0; i < 100000; ++i) {
    const Vec2 g = sample_goal(env.map, rng, 0.3);
    hit.insert({env.map.cell_x(g.x), env.map.cell_y(g.y)});
  }
  // cells whose centre admits a goal
  std::size_t admissible = 0;
  for (int iy = 0; iy < env.map.height; ++iy)
    for (int ix = 0; ix < env.map.width; ++ix)
      if (has_clearance(env.map, env.map.cell_center(ix, iy), 0.3)) ++admissible;
  ASSERT_GT(admissible, 0u);
  EXPECT_GE(static_cast<double>(hit.size()), 0.95 * static_cast<double>(admissible));
}

TEST(GenerateDataset, Deterministic) {
  const auto env = env::cluttered(12, 12, 5, 3);
  SimConfig c;
  c.n_agents = 6;
  c.duration = 30;
  c.rng_seed = 11;
  c.environment = env.map;
  const Dataset a = generate_dataset(c, SfParams{});
  const Dataset b = generate_dataset(c, SfParams{});
  EXPECT_TRUE(a == b);
  c.rng_seed = 12;
  EXPECT_FALSE(a == generate_dataset(c, SfParams{}));
}

TEST(GenerateDataset, ShapeAndSpeedBound) {
  const auto env = env::cluttered(12, 12, 5, 3);
  SimConfig c;
  c.n_agents = 5;
  c.duration = 60;
  c.environment = env.map;
  SfParams p;
  const Dataset ds = generate_dataset(c, p);
  ASSERT_EQ(ds.trajectories.size(), 5u);
  for (const auto& tr : ds.trajectories) {
    EXPECT_EQ(tr.samples.size(), 201u);
    for (const auto& s : tr.samples) {
      EXPECT_LE(s.velocity.norm(), p.max_speed_factor * p.desired_speed_max + 1e-12);
      EXPECT_FALSE(ds.map.occupied(s.position));
      EXPECT_GE(s.heading, -kPi);
      EXPECT_LT(s.heading, kPi);
    }
  }
}

TEST(GenerateDataset, NoiseFreeWalkApproachesGoal) {
  SfParams p;
  p.force_noise_std = 0.0;
  std::vector<SimAgent> world = {make_agent(0, {-10, -10}, {0, 0}, {12, 5}, 1.2)};
  const WorldMap m = open_field();
  Rng rng(1);
  StepOptions keep;
  keep.resample_goals = false;
  double prev = distance(world[0].state.position, world[0].goal);
  while (prev > p.goal_radius) {
    world = step(world, m, p, 0.3, rng, keep);
    const double d = distance(world[0].state.position, world[0].goal);
    EXPECT_LT(d, prev);
    prev = d;
  }
}

TEST(GenerateDataset, ClutterRunHasNoPenetrations) {
  const auto env = env::cluttered(20, 20, 12, 1);
  SimConfig c;
  c.n_agents = 20;
  c.duration = 120;
  c.environment = env.map;
  const Dataset ds = generate_dataset(c, SfParams{});
  for (const auto& tr : ds.trajectories)
    for (const auto& s : tr.samples) ASSERT_FALSE(ds.map.occupied(s.position));
}

TEST(Config, RejectsInvalidParameters) {
  SfParams p;
  p.relaxation_time = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  SimConfig c;
  c.environment = fixtures::free_map(2, 2);
  c.n_agents = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
