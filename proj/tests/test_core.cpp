#include <gtest/gtest.h>

#include "pedpred/core.hpp"
#include "pedpred/random.hpp"
#include "test_util.hpp"

using namespace pedpred;

namespace {

AgentState agent_at(Vec2 p, double heading) {
  AgentState a;
  a.position = p;
  a.heading = heading;
  return a;
}

}  // namespace

TEST(Frames, OriginMapsToOrigin) {
  const auto a = agent_at({3.0, -2.0}, 1.1);
  const Vec2 l = world_to_agent_frame(a.position, a);
  EXPECT_EQ(l.x, 0.0);
  EXPECT_EQ(l.y, 0.0);
}

TEST(Frames, IdentityFrame) {
  const Vec2 l = world_to_agent_frame({1.0, 0.0}, agent_at({0.0, 0.0}, 0.0));
  EXPECT_DOUBLE_EQ(l.x, 1.0);
  EXPECT_DOUBLE_EQ(l.y, 0.0);
}

TEST(Frames, QuarterTurnWorldToAgent) {
  const Vec2 l = world_to_agent_frame({0.0, 1.0}, agent_at({0.0, 0.0}, kPi / 2));
  EXPECT_NEAR(l.x, 1.0, 1e-15);
  EXPECT_NEAR(l.y, 0.0, 1e-15);
}

TEST(Frames, AgentToWorldExamples) {
  const auto a = agent_at({2.0, 3.0}, 0.7);
  const Vec2 o = agent_to_world_frame({0.0, 0.0}, a);
  EXPECT_EQ(o.x, 2.0);
  EXPECT_EQ(o.y, 3.0);
  const Vec2 p = agent_to_world_frame({1.0, 0.0}, agent_at({2.0, 3.0}, 0.0));
  EXPECT_DOUBLE_EQ(p.x, 3.0);
  EXPECT_DOUBLE_EQ(p.y, 3.0);
  const Vec2 q = agent_to_world_frame({1.0, 0.0}, agent_at({0.0, 0.0}, kPi / 2));
  EXPECT_NEAR(q.x, 0.0, 1e-15);
  EXPECT_NEAR(q.y, 1.0, 1e-15);
}

TEST(Frames, RoundTripAndDistancePreservation) {
  Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    const auto a = agent_at({rng.uniform(-50, 50), rng.uniform(-50, 50)}, rng.uniform(-kPi, kPi));
    const Vec2 p{rng.uniform(-50, 50), rng.uniform(-50, 50)};
    const Vec2 q{rng.uniform(-50, 50), rng.uniform(-50, 50)};
    const Vec2 back = agent_to_world_frame(world_to_agent_frame(p, a), a);
    EXPECT_LT((back - p).norm(), 1e-9);
    const double d_world = distance(p, q);
    const double d_local = distance(world_to_agent_frame(p, a), world_to_agent_frame(q, a));
    EXPECT_NEAR(d_world, d_local, 1e-9);
  }
}

TEST(Heading, UpdateExamples) {
  EXPECT_EQ(update_heading(0.3, {1.0, 0.0}), 0.0);
  EXPECT_EQ(update_heading(0.3, {0.0, 0.0}), 0.3);
  EXPECT_DOUBLE_EQ(update_heading(0.0, {1.0, 1.0}), kPi / 4);
}

TEST(Heading, ThresholdIsStrict) {
  EXPECT_EQ(update_heading(1.0, {kHeadingSpeedEps, 0.0}), 1.0);
  EXPECT_EQ(update_heading(1.0, {kHeadingSpeedEps * 1.01, 0.0}), 0.0);
}

TEST(Heading, WrapIntoHalfOpenRange) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), -kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), -kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi + 0.1), -kPi + 0.1, 1e-12);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double w = wrap_angle(rng.uniform(-100, 100));
    EXPECT_GE(w, -kPi);
    EXPECT_LT(w, kPi);
  }
  // atan2 returns +pi for (-1, 0); the stored heading must stay in [-pi, pi)
  EXPECT_DOUBLE_EQ(update_heading(0.0, {-1.0, 0.0}), -kPi);
}

TEST(WorldState, UniqueIdsAndLookup) {
  WorldState ws;
  ws.agents.push_back(agent_at({0, 0}, 0));
  ws.agents.back().id = 4;
  ws.agents.push_back(agent_at({1, 0}, 0));
  ws.agents.back().id = 7;
  EXPECT_TRUE(ws.ids_unique());
  ASSERT_NE(ws.find(7), nullptr);
  EXPECT_EQ(ws.find(7)->position.x, 1.0);
  EXPECT_EQ(ws.find(5), nullptr);
  ws.agents.back().id = 4;
  EXPECT_FALSE(ws.ids_unique());
}

TEST(WorldMap, CellIndexingAndOccupancy) {
  WorldMap m({-1.0, -2.0}, 0.5, 4, 6);
  EXPECT_TRUE(m.valid());
  EXPECT_EQ(m.free_cell_count(), 24u);
  m.at(2, 3) = 1;
  EXPECT_TRUE(m.occupied({0.1, -0.4}));  // x cell 2, y cell 3
  EXPECT_FALSE(m.occupied({0.1, -0.6}));
  EXPECT_TRUE(m.occupied({-1.5, 0.0}));  // off the map
  const Vec2 c = m.cell_center(2, 3);
  EXPECT_DOUBLE_EQ(c.x, 0.25);
  EXPECT_DOUBLE_EQ(c.y, -0.25);
  EXPECT_DOUBLE_EQ(m.width_m(), 2.0);
}

TEST(WorldMap, RejectsBadResolution) {
  EXPECT_THROW(WorldMap({0, 0}, 0.0, 2, 2), InvalidArgument);
  EXPECT_THROW(WorldMap({0, 0}, 0.1, -1, 2), InvalidArgument);
}

TEST(Dataset, SceneAndIndexRange) {
  Dataset ds;
  ds.trajectories.push_back(fixtures::straight_line(1, {0, 0}, {1, 0}, 5, 0.3, 2));
  ds.trajectories.push_back(fixtures::straight_line(2, {0, 1}, {0, 1}, 3, 0.3, 0));
  EXPECT_EQ(ds.first_index(), 0);
  EXPECT_EQ(ds.last_index(), 6);
  EXPECT_EQ(ds.scene_at(2).agents.size(), 2u);
  EXPECT_EQ(ds.scene_at(4).agents.size(), 1u);
  EXPECT_EQ(ds.scene_at(9).agents.size(), 0u);
  EXPECT_EQ(ds.sample_count(), 8u);
  EXPECT_NO_THROW(ds.validate());
  ds.trajectories[1].dt = 0.4;
  EXPECT_THROW(ds.validate(), InvalidArgument);
}

TEST(Dataset, DerivedHeadingsFollowVelocity) {
  auto tr = fixtures::straight_line(1, {0, 0}, {0, 1}, 4, 0.3);
  tr.samples[2].velocity = {0.0, 0.0};
  derive_headings(tr);
  EXPECT_DOUBLE_EQ(tr.samples[0].heading, kPi / 2);
  EXPECT_DOUBLE_EQ(tr.samples[2].heading, kPi / 2);  // held while stationary
}
