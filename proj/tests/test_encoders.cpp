#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "pedpred/encoders.hpp"
#include "pedpred/environments.hpp"
#include "test_util.hpp"

using namespace pedpred;
using namespace pedpred::enc;

namespace {

AgentState pose(int id, Vec2 p, double heading) {
  AgentState a;
  a.id = id;
  a.position = p;
  a.heading = heading;
  return a;
}

}  // namespace

TEST(Apg, EmptySceneIsAllRmax) {
  WorldState ws;
  ws.agents.push_back(pose(1, {0, 0}, 0.4));
  const auto apg = build_apg(ws, 1);
  ASSERT_EQ(apg.values.size(), 72u);
  for (double v : apg.values) EXPECT_EQ(v, 6.0);
}

TEST(Apg, SingleAgentAhead) {
  WorldState ws;
  ws.agents.push_back(pose(1, {0, 0}, 0.0));
  ws.agents.push_back(pose(2, {2, 0}, 0.0));
  const auto apg = build_apg(ws, 1);
  EXPECT_EQ(apg.values[0], 2.0);
  for (std::size_t k = 1; k < apg.values.size(); ++k) EXPECT_EQ(apg.values[k], 6.0);
}

TEST(Apg, FarAgentIsClippedAndCoincidentIsClamped) {
  WorldState ws;
  ws.agents.push_back(pose(1, {0, 0}, 0.0));
  ws.agents.push_back(pose(2, {0, 9}, 0.0));
  ws.agents.push_back(pose(3, {0, 0}, 0.0));
  const auto apg = build_apg(ws, 1);
  EXPECT_EQ(apg.values[18], 6.0);
  EXPECT_EQ(apg.values[0], 0.01);
  for (double v : apg.normalized()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Apg, BoundaryBelongsToUpperCone) {
  EXPECT_EQ(cone_index(kTwoPi / 72 * 5, 72), 5);
  EXPECT_EQ(cone_index(0.0, 72), 0);
  EXPECT_EQ(cone_index(std::nextafter(kTwoPi, 0.0), 72), 71);
}

TEST(Apg, UnknownQueryIsAnError) {
  WorldState ws;
  ws.agents.push_back(pose(1, {0, 0}, 0.0));
  EXPECT_THROW(build_apg(ws, 3), InvalidArgument);
}

TEST(Apg, MatchesBruteForceOracle) {
  Rng rng(5);
  for (int s = 0; s < 200; ++s) {
    const auto ws = fixtures::random_scene(rng, 50);
    const int q = ws.agents[rng.index(ws.agents.size())].id;
    EXPECT_EQ(build_apg(ws, q).values, oracle::apg(ws, q, 72, 6.0));
  }
}

TEST(Apg, AddingAnAgentNeverIncreasesValues) {
  Rng rng(6);
  for (int s = 0; s < 100; ++s) {
    auto ws = fixtures::random_scene(rng, 20);
    const auto before = build_apg(ws, 1);
    AgentState extra = pose(1000, {rng.uniform(-10, 10), rng.uniform(-10, 10)}, 0.0);
    ws.agents.push_back(extra);
    const auto after = build_apg(ws, 1);
    for (std::size_t k = 0; k < before.values.size(); ++k) EXPECT_LE(after.values[k], before.values[k]);
  }
}

TEST(Apg, HeadingRotationShiftsCones) {
  Rng rng(7);
  const double width = kTwoPi / 72;
  for (int s = 0; s < 50; ++s) {
    auto ws = fixtures::random_scene(rng, 30);
    ws.agents[0].heading = (rng.index(72) + 0.5) * width - kPi;
    const auto base = build_apg(ws, 1);
    const int m = static_cast<int>(rng.index(72));
    // turning the query by -m cones moves every other agent m cones counter-clockwise
    ws.agents[0].heading -= m * width;
    const auto shifted = build_apg(ws, 1);
    for (int k = 0; k < 72; ++k)
      EXPECT_EQ(shifted.values[static_cast<std::size_t>((k + m) % 72)], base.values[static_cast<std::size_t>(k)]);
  }
}

TEST(Apg, RigidRotationOfSceneIsInvariant) {
  Rng rng(8);
  const double width = kTwoPi / 72;
  for (int s = 0; s < 50; ++s) {
    auto ws = fixtures::random_scene(rng, 30);
    const auto base = build_apg(ws, 1);
    const double delta = static_cast<double>(rng.index(72)) * width;
    const Vec2 c = ws.agents[0].position;
    for (auto& a : ws.agents) {
      a.position = rotate(a.position - c, delta) + c;
      a.heading = wrap_angle(a.heading + delta);
    }
    const auto turned = build_apg(ws, 1);
    for (std::size_t k = 0; k < 72; ++k) EXPECT_NEAR(turned.values[k], base.values[k], 1e-9);
  }
}

TEST(Apg, RemovingNonMinimizersKeepsValues) {
  Rng rng(9);
  for (int s = 0; s < 50; ++s) {
    auto ws = fixtures::random_scene(rng, 40);
    const auto base = build_apg(ws, 1);
    const AgentState& q = ws.agents[0];
    WorldState pruned;
    pruned.agents.push_back(q);
    for (std::size_t i = 1; i < ws.agents.size(); ++i) {
      const auto& a = ws.agents[i];
      const int k = cone_index(polar_angle(world_to_agent_frame(a.position, q)), 72);
      const double rho = std::max(kMinApgDistance, distance(a.position, q.position));
      if (rho == base.values[static_cast<std::size_t>(k)]) pruned.agents.push_back(a);
    }
    EXPECT_EQ(build_apg(pruned, 1).values, base.values);
  }
}

TEST(LocalGrid, EmptyMapIsAllFree) {
  const WorldMap m = fixtures::free_map(20, 20);
  const auto g = extract_local_grid(m, pose(0, {10, 10}, 0.7));
  ASSERT_EQ(g.size, 60);
  for (double v : g.cells) EXPECT_EQ(v, 0.0);
}

TEST(LocalGrid, ObstacleAheadAtHeadingZero) {
  WorldMap m = fixtures::free_map(20, 20);
  m.at(m.cell_x(11.05), m.cell_y(10.05)) = 1;
  const auto g = extract_local_grid(m, pose(0, {10.05, 10.05}, 0.0));
  // local (+1.0, 0) lies in row 40, column 30
  int hits = 0;
  for (int i = 39; i <= 41; ++i)
    for (int j = 29; j <= 31; ++j) hits += g.at(i, j) > 0.5;
  EXPECT_GE(hits, 1);
  EXPECT_EQ(std::count(g.cells.begin(), g.cells.end(), 1.0), hits);
}

TEST(LocalGrid, ObstacleNorthAtQuarterTurn) {
  WorldMap m = fixtures::free_map(20, 20);
  m.at(m.cell_x(10.05), m.cell_y(11.05)) = 1;
  const auto g = extract_local_grid(m, pose(0, {10.05, 10.05}, kPi / 2));
  int hits = 0;
  for (int i = 39; i <= 41; ++i)
    for (int j = 29; j <= 31; ++j) hits += g.at(i, j) > 0.5;
  EXPECT_GE(hits, 1);
  EXPECT_EQ(std::count(g.cells.begin(), g.cells.end(), 1.0), hits);
}

TEST(LocalGrid, OffMapReadsOccupied) {
  const WorldMap m = fixtures::free_map(4, 4);
  const auto g = extract_local_grid(m, pose(0, {0.2, 2.0}, 0.0));
  EXPECT_EQ(g.at(0, 30), 1.0);   // 2.95 m behind
  EXPECT_EQ(g.at(59, 30), 0.0);  // 2.95 m ahead
}

TEST(LocalGrid, MatchesPerCellOracle) {
  const auto env = env::cluttered(20, 20, 12, 4);
  Rng rng(10);
  for (int s = 0; s < 100; ++s) {
    const auto a = pose(0, {rng.uniform(-2, 22), rng.uniform(-2, 22)}, rng.uniform(-kPi, kPi));
    EXPECT_EQ(extract_local_grid(env.map, a).cells, oracle::local_grid(env.map, a, 6.0, 0.1));
  }
}

TEST(LocalGrid, RejectsNonIntegerCellCount) {
  const WorldMap m = fixtures::free_map(4, 4);
  EXPECT_THROW(extract_local_grid(m, pose(0, {2, 2}, 0), 6.05, 0.1), InvalidArgument);
  EXPECT_NO_THROW(extract_local_grid(m, pose(0, {2, 2}, 0), 3.0, 0.2));
}
