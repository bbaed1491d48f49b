#include <random>

#include <gtest/gtest.h>

#include "pesim/geometry.hpp"

using namespace pesim;

namespace {

Arena one_pillar(Vec3 c, double h = 0.2) {
  Arena a;
  a.obstacles.push_back({c, h});
  return a;
}

}  // namespace

TEST(Frames, SelfMapsToOrigin) {
  const AgentPose pose{{3.0, -2.0, 1.0}, 0.7};
  const Vec3 b = world_to_body(pose.position, pose);
  EXPECT_EQ(b, (Vec3{0, 0, 0}));
}

TEST(Frames, IdentityRotation) {
  const Vec3 b = world_to_body({1, 2, 0}, AgentPose{});
  EXPECT_DOUBLE_EQ(b.x, 1.0);
  EXPECT_DOUBLE_EQ(b.y, 2.0);
}

TEST(Frames, QuarterTurnLeftMapsLeftToForward) {
  const Vec3 b = world_to_body({0, 1, 0}, AgentPose{{}, kPi / 2});
  EXPECT_NEAR(b.x, 1.0, 1e-15);
  EXPECT_NEAR(b.y, 0.0, 1e-15);
}

TEST(Frames, RoundTripRandom) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  std::uniform_real_distribution<double> yaw(-4.0, 4.0);
  for (int i = 0; i < 100000; ++i) {
    const Vec3 p{u(rng), u(rng), u(rng)};
    const AgentPose pose{{u(rng), u(rng), u(rng)}, yaw(rng)};
    const Vec3 q = body_to_world(world_to_body(p, pose), pose);
    ASSERT_LT((q - p).norm(), 1e-9);
  }
}

TEST(Spherical, ForwardAxis) {
  const auto s = cartesian_to_spherical({1, 0, 0});
  EXPECT_DOUBLE_EQ(s.range, 1.0);
  EXPECT_DOUBLE_EQ(s.azimuth, 0.0);
  EXPECT_DOUBLE_EQ(s.elevation, 0.0);
}

TEST(Spherical, LeftAxis) {
  const auto s = cartesian_to_spherical({0, 2, 0});
  EXPECT_DOUBLE_EQ(s.range, 2.0);
  EXPECT_DOUBLE_EQ(s.azimuth, kPi / 2);
  EXPECT_DOUBLE_EQ(s.elevation, 0.0);
}

TEST(Spherical, PoleHasZeroAzimuth) {
  const auto s = cartesian_to_spherical({0, 0, 1});
  EXPECT_DOUBLE_EQ(s.range, 1.0);
  EXPECT_DOUBLE_EQ(s.azimuth, 0.0);
  EXPECT_DOUBLE_EQ(s.elevation, kPi / 2);
}

TEST(Spherical, BackwardAzimuthIsMinusPi) {
  EXPECT_DOUBLE_EQ(cartesian_to_spherical({-1, 0, 0}).azimuth, -kPi);
}

TEST(Spherical, ZeroPointThrows) {
  EXPECT_THROW(cartesian_to_spherical({0, 0, 0}), DegeneratePointError);
}

TEST(Raycast, EmptyArenaHitsWallAtRadius) {
  Arena arena;
  LidarConfig cfg;
  const auto cloud = raycast_lidar({{0, 0, 1}, 0.3}, arena, cfg);
  EXPECT_EQ(cloud.points.size(), static_cast<std::size_t>(cfg.azimuth_samples) * cfg.elevations_deg.size());
  for (const auto& p : cloud.points) EXPECT_NEAR(std::hypot(p.x, p.y), 9.0, 1e-9);
}

TEST(Raycast, PillarFaceAhead) {
  // Face at x = 2, so the pillar centre sits at 2 + half extent.
  const Arena arena = one_pillar({2.2, 0, 0});
  LidarConfig cfg;
  cfg.elevations_deg = {0.0};
  const auto cloud = raycast_lidar({{0, 0, 1}, 0.0}, arena, cfg);
  // Rays sit half a sample off the axis; the nearest one still ends on the x = 2 face.
  const Vec3* best = nullptr;
  for (const auto& p : cloud.points) {
    if (!best || std::abs(std::atan2(p.y, p.x)) < std::abs(std::atan2(best->y, best->x))) best = &p;
  }
  ASSERT_NE(best, nullptr);
  EXPECT_NEAR(best->x, 2.0, 1e-12);
  EXPECT_NEAR(best->norm(), 2.0 / std::cos(deg2rad(0.5)), 1e-12);
}

TEST(Raycast, MaxRangeDropout) {
  Arena arena;
  arena.radius = 30.0;
  LidarConfig cfg;
  const auto cloud = raycast_lidar({{0, 0, 1}, 0.0}, arena, cfg);
  EXPECT_TRUE(cloud.points.empty());
}

TEST(Raycast, OutsideArenaThrows) {
  EXPECT_THROW(raycast_lidar({{10, 0, 1}, 0.0}, Arena{}, LidarConfig{}), std::invalid_argument);
}

TEST(Raycast, SoundnessAgainstSampling) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (int trial = 0; trial < 20; ++trial) {
    Arena arena;
    for (int i = 0; i < 6; ++i) arena.obstacles.push_back({{u(rng), u(rng), 0}, 0.2 + 0.1 * (i % 3)});
    AgentPose pose{{u(rng), u(rng), 1.0}, u(rng)};
    if (distance_to_nearest_obstacle(pose.position, arena) < 0.05) continue;
    LidarConfig cfg;
    cfg.elevations_deg = {0.0, 12.5};
    const auto cloud = raycast_lidar(pose, arena, cfg);
    for (const auto& pb : cloud.points) {
      const Vec3 pw = body_to_world(pb, pose);
      // The hit lies on a pillar face or the wall.
      double surface = std::abs(pw.norm_xy() - arena.radius);
      for (const auto& ob : arena.obstacles) {
        const double dx = std::abs(pw.x - ob.center.x) - ob.half_extent;
        const double dy = std::abs(pw.y - ob.center.y) - ob.half_extent;
        surface = std::min(surface, std::abs(std::max(dx, dy)));
      }
      ASSERT_LT(surface, 1e-6);
      // Nothing solid lies strictly before the hit.
      const Vec3 dir = unit_or_zero(Vec3{pw.x - pose.position.x, pw.y - pose.position.y, 0});
      const double range = std::hypot(pw.x - pose.position.x, pw.y - pose.position.y);
      for (double s = 0.0; s < range - 1e-3; s += 0.01) {
        const Vec3 q = pose.position + dir * s;
        ASSERT_GT(distance_to_nearest_obstacle(q, arena), 0.0) << "ray passes through a solid at s=" << s;
      }
    }
  }
}

TEST(Raycast, Deterministic) {
  const Arena arena = one_pillar({3, 1, 0});
  LidarConfig cfg;
  cfg.range_noise_sigma = 0.05;
  const auto a = raycast_lidar({{0.5, -0.5, 1}, 0.4}, arena, cfg, 99);
  const auto b = raycast_lidar({{0.5, -0.5, 1}, 0.4}, arena, cfg, 99);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i], b.points[i]);
}

TEST(Distance, CentreOfEmptyArena) { EXPECT_DOUBLE_EQ(distance_to_nearest_obstacle({0, 0, 1}, Arena{}), 9.0); }

TEST(Distance, OneMetreFromFace) {
  const Arena arena = one_pillar({0, 0, 0});
  EXPECT_NEAR(distance_to_nearest_obstacle({1.2, 0, 1}, arena), 1.0, 1e-12);
}

TEST(Distance, InsidePillarIsZero) {
  EXPECT_EQ(distance_to_nearest_obstacle({0.05, 0.05, 1}, one_pillar({0, 0, 0})), 0.0);
}

TEST(Distance, LipschitzAlongPaths) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-7.0, 7.0);
  Arena arena;
  for (int i = 0; i < 8; ++i) arena.obstacles.push_back({{u(rng), u(rng), 0}, 0.3});
  for (int path = 0; path < 200; ++path) {
    const Vec3 a{u(rng), u(rng), 1}, b{u(rng), u(rng), 1};
    const int n = 200;
    Vec3 prev = a;
    double prev_d = distance_to_nearest_obstacle(a, arena);
    for (int i = 1; i <= n; ++i) {
      const Vec3 q = a + (b - a) * (static_cast<double>(i) / n);
      const double d = distance_to_nearest_obstacle(q, arena);
      ASSERT_LE(std::abs(d - prev_d), (q - prev).norm() + 1e-12);
      prev = q;
      prev_d = d;
    }
  }
}

TEST(LineOfSight, SamePoint) { EXPECT_TRUE(line_of_sight({1, 1, 1}, {1, 1, 1}, one_pillar({1.5, 1, 0}))); }

TEST(LineOfSight, PillarOnMidpointBlocks) {
  EXPECT_FALSE(line_of_sight({-3, 0, 1}, {3, 0, 1}, one_pillar({0, 0, 0})));
}

TEST(LineOfSight, EmptyArenaAlwaysClear) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (int i = 0; i < 1000; ++i) EXPECT_TRUE(line_of_sight({u(rng), u(rng), 1}, {u(rng), u(rng), 1}, Arena{}));
}

TEST(ArenaJson, RoundTrip) {
  Arena a;
  a.radius = 7.5;
  a.obstacles = {{{1, 2, 0}, 0.2}, {{-3, 0.5, 0}, 0.4}};
  const Arena b = arena_from_json_text(arena_to_json_text(a));
  EXPECT_EQ(b.radius, a.radius);
  ASSERT_EQ(b.obstacles.size(), 2u);
  EXPECT_EQ(b.obstacles[1].center, a.obstacles[1].center);
  EXPECT_EQ(b.obstacles[1].half_extent, 0.4);
}

TEST(ArenaJson, PillarOutsideRejected) {
  Arena a;
  a.obstacles = {{{8.9, 0, 0}, 0.5}};
  EXPECT_THROW(a.validate(), std::invalid_argument);
}
