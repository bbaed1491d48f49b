#include <random>

#include <gtest/gtest.h>

#include "pesim/rewards.hpp"

using namespace pesim;

namespace {

AgentState agent(Vec3 p, Vec3 v = {}) {
  AgentState a;
  a.position = p;
  a.velocity = v;
  return a;
}

WorldState random_world(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  WorldState s;
  for (int i = 0; i < 3; ++i) s.pursuers.push_back(agent({6 * u(rng), 6 * u(rng), 1}, {u(rng), u(rng), 0}));
  s.evader = agent({6 * u(rng), 6 * u(rng), 1}, {u(rng), u(rng), 0});
  s.arena.obstacles.push_back({{2 * u(rng), 2 * u(rng), 0}, 0.2});
  return s;
}

}  // namespace

TEST(Pursuit, BothClosing) {
  const std::vector<AgentState> head_on{agent({0, 0, 1}, {0.5, 0, 0}), agent({10, 0, 1}, {-0.5, 0, 0})};
  EXPECT_DOUBLE_EQ(pursuit_reward(head_on, agent({5, 0, 1})), 1.0);
}

TEST(Pursuit, AllStatic) {
  const std::vector<AgentState> ps{agent({0, 0, 1}), agent({0, 2, 1})};
  EXPECT_EQ(pursuit_reward(ps, agent({5, 0, 1})), 0.0);
}

TEST(Pursuit, OneClosingOneOpening) {
  const std::vector<AgentState> ps{agent({0, 0, 1}, {0.5, 0, 0}), agent({10, 0, 1}, {0.5, 0, 0})};
  EXPECT_DOUBLE_EQ(pursuit_reward(ps, agent({5, 0, 1})), -0.5);
}

TEST(Coordination, PeakAndOneSigma) {
  const std::vector<AgentState> at{agent({0, 0, 1}), agent({3, 0, 1})};
  EXPECT_EQ(coordination_reward(at, 3.0, 1.0), 1.0);
  const std::vector<AgentState> off{agent({0, 0, 1}), agent({4, 0, 1})};
  EXPECT_NEAR(coordination_reward(off, 3.0, 1.0), std::exp(-0.5), 1e-15);
  EXPECT_EQ(coordination_reward(std::vector<AgentState>{agent({})}, 3.0, 1.0), 1.0);
}

TEST(Coordination, ArgmaxAtDesiredSpacing) {
  double best_d = -1, best = -1;
  for (int i = 0; i <= 1000; ++i) {
    const double d = 0.01 * i;
    const std::vector<AgentState> ps{agent({0, 0, 1}), agent({d, 0, 1})};
    const double r = coordination_reward(ps, 3.0, 1.0);
    EXPECT_GT(r, 0.0);
    EXPECT_LE(r, 1.0);
    if (r > best) { best = r; best_d = d; }
  }
  EXPECT_NEAR(best_d, 3.0, 1e-9);
}

TEST(Formation, Geometry) {
  const AgentState e = agent({5, 0, 1});
  // Mate opposite the evader, mate toward the evader, mate at a right angle.
  EXPECT_NEAR(formation_reward(std::vector<AgentState>{agent({0, 0, 1}), agent({-1, 0, 1})}, e), (kPi + 0.0) / 2, 1e-12);
  const std::vector<AgentState> right{agent({0, 0, 1}), agent({0, 1, 1})};
  const double other = std::acos(unit_or_zero(Vec3{0, -1, 0}).dot(unit_or_zero(Vec3{5, -1, 0})));
  EXPECT_NEAR(formation_reward(right, e), (kPi / 2 + other) / 2, 1e-12);
  EXPECT_EQ(formation_reward(std::vector<AgentState>{agent({0, 0, 1})}, e), 0.0);
}

TEST(Formation, ContributionBounded) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 2000; ++i) {
    const auto s = random_world(rng);
    const double f = formation_reward(s.pursuers, s.evader);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, kPi);
  }
}

TEST(Safety, Values) {
  EXPECT_EQ(safety_reward(std::vector<double>{2.0, 5.0}, 1.0), 0.0);
  EXPECT_NEAR(safety_reward(std::vector<double>{0.5, 3.0}, 1.0), std::log(0.5) / 2, 1e-15);
  EXPECT_NEAR(safety_reward(std::vector<double>{0.0}, 1.0), std::log(1e-3), 1e-15);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 3);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> c{u(rng), u(rng)};
    const double r = safety_reward(c, 1.0);
    EXPECT_LE(r, 0.0);
    EXPECT_EQ(r == 0.0, c[0] >= 1.0 && c[1] >= 1.0);
  }
}

TEST(Total, SparseTerms) {
  WorldState s;
  s.pursuers = {agent({0, 0, 1}), agent({3, 0, 1})};
  s.evader = agent({1, 5, 1});
  RewardWeights w;
  EXPECT_EQ(total_reward(s, w, Outcome::running()).r_sparse, 0.0);
  EXPECT_EQ(total_reward(s, w, Outcome::capture()).r_sparse, w.r_cap);
  EXPECT_EQ(total_reward(s, w, Outcome::collision(0)).r_sparse, w.r_coll);
  EXPECT_EQ(total_reward(s, w, Outcome::timeout()).r_sparse, w.r_out);
  EXPECT_EQ(total_reward(s, w, Outcome::running()).r_time, -1.0);
}

TEST(Total, LinearInEachWeight) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const WorldState s = random_world(rng);
    RewardWeights w;
    const RewardBreakdown base = total_reward(s, w, Outcome::running());
    double RewardWeights::*fields[] = {&RewardWeights::w_purs, &RewardWeights::w_coord, &RewardWeights::w_form,
                                       &RewardWeights::w_obs, &RewardWeights::w_time};
    const double terms[] = {base.r_purs, base.r_coord, base.r_form, base.r_obs, base.r_time};
    for (int f = 0; f < 5; ++f) {
      RewardWeights w1 = w, w2 = w;
      w1.*fields[f] += 1.0;
      w2.*fields[f] += 2.0;
      const double d1 = total_reward(s, w1, Outcome::running()).total - base.total;
      const double d2 = total_reward(s, w2, Outcome::running()).total - base.total;
      EXPECT_NEAR(d1, terms[f], 1e-9);
      EXPECT_NEAR(d2, 2 * d1, 1e-9);
    }
  }
}

TEST(Total, LidarClearanceSwitch) {
  WorldState s;
  s.pursuers = {agent({0, 0, 1}), agent({3, 0, 1})};
  s.evader = agent({1, 5, 1});
  RewardWeights w;
  const std::vector<double> lidar{0.5, 0.5};
  EXPECT_EQ(total_reward(s, w, Outcome::running(), lidar).r_obs, 0.0);
  w.clearance_source = ClearanceSource::LidarMinimum;
  EXPECT_NEAR(total_reward(s, w, Outcome::running(), lidar).r_obs, std::log(0.5), 1e-15);
}
