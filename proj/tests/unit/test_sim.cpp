#include <random>

#include <gtest/gtest.h>

#include "pesim/episode.hpp"
#include "pesim/sim.hpp"

using namespace pesim;

namespace {

WorldState still_world(std::vector<Vec3> pursuers, Vec3 evader) {
  WorldState s;
  for (const auto& p : pursuers) {
    AgentState a;
    a.position = p;
    s.pursuers.push_back(a);
  }
  s.evader.position = evader;
  return s;
}

}  // namespace

TEST(Spawn, PursuersBehindEvader) {
  EpisodeConfig cfg;
  cfg.seed = 42;
  const WorldState s = spawn_episode(cfg);
  ASSERT_EQ(s.pursuers.size(), 2u);
  for (const auto& p : s.pursuers) {
    EXPECT_DOUBLE_EQ(s.evader.position.x - p.position.x, 3.5);
    EXPECT_EQ(p.yaw, 0.0);
    EXPECT_EQ(p.position.z, 1.0);
  }
  EXPECT_DOUBLE_EQ(s.pursuers[1].position.y - s.pursuers[0].position.y, 1.0);
  EXPECT_LT(s.evader.position.norm_xy(), 9.0);
}

TEST(Spawn, SameSeedSameWorld) {
  EpisodeConfig cfg;
  cfg.seed = 5;
  cfg.obstacle_count = 6;
  EXPECT_EQ(spawn_episode(cfg), spawn_episode(cfg));
  cfg.seed = 6;
  const auto other = spawn_episode(cfg);
  cfg.seed = 5;
  EXPECT_FALSE(spawn_episode(cfg) == other);
}

TEST(Spawn, ObstaclesClearOfAgents) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    EpisodeConfig cfg;
    cfg.seed = seed;
    cfg.obstacle_count = 9;
    const auto s = spawn_episode(cfg);
    ASSERT_EQ(s.arena.obstacles.size(), 9u);
    EXPECT_NO_THROW(s.arena.validate());
    for (const auto& ob : s.arena.obstacles) {
      EXPECT_GE(ob.distance_xy(s.evader.position), cfg.obstacle_spawn_clearance);
      for (const auto& p : s.pursuers) EXPECT_GE(ob.distance_xy(p.position), cfg.obstacle_spawn_clearance);
    }
  }
}

TEST(Spawn, OvercrowdedArenaThrows) {
  EpisodeConfig cfg;
  cfg.obstacle_count = 5000;
  cfg.spawn_retries = 50;
  EXPECT_THROW(spawn_episode(cfg), SpawnError);
}

TEST(Config, TeamSizeBounds) {
  EpisodeConfig cfg;
  cfg.n_pursuers = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.n_pursuers = 5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.n_pursuers = 4;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.substeps(), 10);
  EXPECT_EQ(cfg.max_cycles(), 300);
}

TEST(Physics, ZeroCommandStaysPut) {
  EpisodeConfig cfg;
  WorldState s = still_world({{0, 0, 1}, {0, 1, 1}}, {3, 0, 1});
  const WorldState start = s;
  const std::vector<VelocityCommand> zero(2);
  for (int i = 0; i < 500; ++i) s = step_physics(s, zero, {}, cfg, cfg.physics_dt());
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(s.pursuers[i].position, start.pursuers[i].position);
  EXPECT_EQ(s.evader.position, start.evader.position);
  EXPECT_EQ(s.tick, 500);
}

TEST(Physics, FirstOrderResponseReachesVmax) {
  EpisodeConfig cfg;
  WorldState s = still_world({{0, 0, 1}}, {5, 5, 1});
  cfg.n_pursuers = 1;
  const std::vector<VelocityCommand> cmd{{0.8, 0.0}};
  for (int i = 0; i < 300; ++i) s = step_physics(s, cmd, {}, cfg, cfg.physics_dt());
  EXPECT_NEAR(s.pursuers[0].velocity.x, 0.8, 1e-4);
  EXPECT_NEAR(s.pursuers[0].velocity.y, 0.0, 1e-12);
  // After one tau the speed is 1 - 1/e of the command.
  WorldState t = still_world({{0, 0, 1}}, {5, 5, 1});
  for (int i = 0; i < 30; ++i) t = step_physics(t, cmd, {}, cfg, cfg.physics_dt());
  EXPECT_NEAR(t.pursuers[0].velocity.x, 0.8 * (1 - std::exp(-1.0)), 1e-9);
}

TEST(Physics, OversizedCommandIsClamped) {
  EpisodeConfig cfg;
  cfg.n_pursuers = 1;
  WorldState s = still_world({{0, 0, 1}}, {5, 5, 1});
  const WorldCommands cmd{{{30.0, 40.0, 0.0}}, {}};
  for (int i = 0; i < 500; ++i) {
    s = step_physics_world(s, cmd, cfg, cfg.physics_dt());
    ASSERT_LE(s.pursuers[0].velocity.norm(), cfg.pursuer_vmax + 1e-12);
  }
  EXPECT_NEAR(s.pursuers[0].velocity.x, 0.48, 1e-6);
  EXPECT_NEAR(s.pursuers[0].velocity.y, 0.64, 1e-6);
  const auto c = clamp_command({3, 4}, 1.0);
  EXPECT_NEAR(c.vx, 0.6, 1e-15);
  EXPECT_NEAR(c.vy, 0.8, 1e-15);
}

TEST(Physics, NonFiniteCommandThrows) {
  EpisodeConfig cfg;
  cfg.n_pursuers = 1;
  const WorldState s = still_world({{0, 0, 1}}, {5, 5, 1});
  const std::vector<VelocityCommand> cmd{{std::nan(""), 0.0}};
  EXPECT_THROW(step_physics(s, cmd, {}, cfg, 0.01), std::invalid_argument);
}

TEST(Termination, CaptureBelowRadius) {
  EpisodeConfig cfg;
  EXPECT_EQ(check_termination(still_world({{0, 0, 1}, {0, 3, 1}}, {1.39, 0, 1}), cfg).kind, OutcomeKind::Capture);
  EXPECT_EQ(check_termination(still_world({{0, 0, 1}, {0, 3, 1}}, {1.41, 0, 1}), cfg).kind, OutcomeKind::Running);
}

TEST(Termination, CollisionWithPillar) {
  EpisodeConfig cfg;
  WorldState s = still_world({{0, 0, 1}, {0, 3, 1}}, {5, 0, 1});
  s.arena.obstacles.push_back({{0, 3.35, 0}, 0.2});
  const Outcome o = check_termination(s, cfg);
  EXPECT_EQ(o.kind, OutcomeKind::Collision);
  EXPECT_EQ(o.agent, 1);
}

TEST(Termination, CollisionBeatsCapture) {
  EpisodeConfig cfg;
  WorldState s = still_world({{0, 0, 1}, {0, 0.3, 1}}, {1.0, 0, 1});
  EXPECT_EQ(check_termination(s, cfg).kind, OutcomeKind::Collision);
}

TEST(Termination, WallCollision) {
  EpisodeConfig cfg;
  EXPECT_EQ(check_termination(still_world({{8.85, 0, 1}, {0, 3, 1}}, {5, 5, 1}), cfg).kind, OutcomeKind::Collision);
}

TEST(Termination, TimeoutAtMaxCycles) {
  EpisodeConfig cfg;
  WorldState s = still_world({{0, 0, 1}, {0, 3, 1}}, {5, 0, 1});
  s.cycle = 299;
  EXPECT_EQ(check_termination(s, cfg).kind, OutcomeKind::Running);
  s.cycle = 300;
  EXPECT_EQ(check_termination(s, cfg).kind, OutcomeKind::Timeout);
}

TEST(Observable, Cases) {
  Arena arena;
  std::vector<AgentState> ps(1);
  ps[0].position = {0, 0, 1};
  EXPECT_TRUE(observable({0.5, 0, 1}, ps, arena, 10.0));
  EXPECT_FALSE(observable({11, 0, 1}, ps, Arena{20.0, {}}, 10.0));
  arena.obstacles.push_back({{2, 0, 0}, 0.5});
  EXPECT_FALSE(observable({4, 0, 1}, ps, arena, 10.0));
}

TEST(Proprio, RestState) {
  const ProprioVector v = build_proprio(AgentState{});
  EXPECT_EQ(v.size(), 12u);
  EXPECT_EQ(v[0], 1.0);
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_EQ(v[i], 0.0);
}

TEST(Proprio, BodyVelocity) {
  AgentState a;
  a.yaw = kPi / 2;
  a.velocity = {0, 1, 0};
  a.prev_action = {0.3, -0.1};
  const ProprioVector v = build_proprio(a);
  EXPECT_NEAR(v[4], 1.0, 1e-15);
  EXPECT_NEAR(v[5], 0.0, 1e-15);
  EXPECT_NEAR(v[0], std::cos(kPi / 4), 1e-15);
  EXPECT_NEAR(v[3], std::sin(kPi / 4), 1e-15);
  EXPECT_EQ(v[10], 0.3);
  EXPECT_EQ(v[11], -0.1);
}

TEST(Episode, TenSubstepsPerCycle) {
  EpisodeConfig cfg;
  ConstantTeamPolicy hold;
  Episode ep(cfg, {}, {}, hold);
  ep.run_control_cycle();
  EXPECT_EQ(ep.state().tick, 10);
  EXPECT_EQ(ep.state().cycle, 1);
}

TEST(Episode, HoldingTeamTimesOutAt300) {
  EpisodeConfig cfg;
  cfg.seed = 3;
  ConstantTeamPolicy hold;
  Episode ep(cfg, {}, {}, hold);
  int cycles = 0;
  while (!ep.outcome().terminal()) {
    ep.run_control_cycle();
    ++cycles;
  }
  EXPECT_EQ(ep.outcome().kind, OutcomeKind::Timeout);
  EXPECT_EQ(cycles, 300);
  EXPECT_THROW(ep.run_control_cycle(), std::logic_error);
}

TEST(Episode, SpeedLimitsAndCaptureBoundary) {
  BaselineGains gains;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EpisodeConfig cfg;
    cfg.seed = seed;
    cfg.obstacle_count = static_cast<int>(seed % 4) * 2;
    ScriptedTeamPolicy pol(PolicyKind::Janosov, gains);
    Episode ep(cfg, {}, gains.evader, pol);
    double prev = min_pursuer_evader_distance(ep.state());
    while (!ep.outcome().terminal()) {
      ep.run_control_cycle();
      for (const auto& p : ep.state().pursuers) ASSERT_LE(p.velocity.norm(), cfg.pursuer_vmax + 1e-12);
      ASSERT_LE(ep.state().evader.velocity.norm(), cfg.evader_speed + 1e-12);
      const double d = min_pursuer_evader_distance(ep.state());
      if (ep.outcome().kind == OutcomeKind::Capture) {
        EXPECT_LT(d, cfg.d_cap);
        EXPECT_GE(prev, cfg.d_cap);
      }
      prev = d;
    }
  }
}

TEST(Episode, BitDeterministic) {
  EpisodeConfig cfg;
  cfg.seed = 17;
  cfg.obstacle_count = 3;
  BaselineGains gains;
  auto run = [&] {
    ScriptedTeamPolicy pol(PolicyKind::Apf, gains);
    TrajectoryLog log;
    const auto r = run_episode(cfg, {}, gains.evader, pol, &log, true);
    return std::make_pair(r.cycles, log);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Episode, PstoOnlyWhenAsked) {
  EpisodeConfig cfg;
  ConstantTeamPolicy hold;
  Episode lazy(cfg, {}, {}, hold);
  EXPECT_FALSE(lazy.run_control_cycle().observations.frames[0].psto.has_value());
  Episode eager(cfg, {}, {}, hold, true);
  const auto c = eager.run_control_cycle();
  ASSERT_TRUE(c.observations.frames[0].psto.has_value());
  EXPECT_EQ(c.observations.frames[0].psto->lidar.cols(), 120);
}
