#pragma once

#include <span>
#include <vector>

#include "pesim/sim.hpp"

namespace pesim {

/// Where the safety term takes its per-pursuer clearance from.
enum class ClearanceSource { TrueGeometry, LidarMinimum };

struct RewardWeights {
  double w_purs = 1.0;
  double w_coord = 0.3;
  double w_form = 0.3;
  double w_obs = 0.5;
  double w_time = 0.05;

  double d_des = 3.0;       ///< m
  double sigma_coord = 1.0; ///< m
  double d_safety = 1.0;    ///< m

  double r_cap = 100.0;
  double r_coll = -100.0;
  double r_esc = -100.0;
  double r_out = -50.0;

  ClearanceSource clearance_source = ClearanceSource::TrueGeometry;

  void validate() const;
};

struct RewardBreakdown {
  double r_purs = 0.0;
  double r_coord = 0.0;
  double r_form = 0.0;
  double r_obs = 0.0;
  double r_time = 0.0;
  double r_sparse = 0.0;
  double total = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

/// Mean closing velocity plus the worst (minimum) closing velocity.
double pursuit_reward(std::span<const AgentState> pursuers, const AgentState& evader);

/// Gaussian of the mean pairwise pursuer distance around d_des. 1 for a single pursuer.
double coordination_reward(std::span<const AgentState> pursuers, double d_des, double sigma);

/// Mean angle between each pursuer's nearest-teammate direction and its evader direction.
/// 0 for a single pursuer.
double formation_reward(std::span<const AgentState> pursuers, const AgentState& evader);

/// Mean log(min(1, d / d_safety)) with d clamped to d_safety * 1e-3.
double safety_reward(std::span<const double> clearances, double d_safety);

/// Clearances from exact geometry (includes the wall).
std::vector<double> true_clearances(std::span<const AgentState> pursuers, const Arena& arena);

double terminal_reward(const Outcome& outcome, const RewardWeights& w);

/// Team reward for one step. lidar_clearances is consulted only when the weights select
/// ClearanceSource::LidarMinimum and one value per pursuer is supplied.
RewardBreakdown total_reward(const WorldState& state, const RewardWeights& w, const Outcome& outcome,
                             std::span<const double> lidar_clearances = {});

}  // namespace pesim
