#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pesim/policies.hpp"
#include "pesim/psto.hpp"
#include "pesim/rewards.hpp"
#include "pesim/sim.hpp"
#include "pesim/trajectory.hpp"

namespace pesim {

struct CycleResult {
  TeamObservation observations;
  std::vector<VelocityCommand> commands;  ///< body frame, clamped
  VelocityCommand evader_command;
  RewardBreakdown reward;
  Outcome outcome;
};

/// One pursuit episode: world state, the team-shared evader track and the evader's circulation memory.
class Episode {
 public:
  /// Spawns from cfg.seed. When build_psto is false the PSTO is only built if the policy asks for it.
  Episode(EpisodeConfig cfg, RewardWeights weights, EvaderParams evader_params, PursuerTeamPolicy& policy,
          bool build_psto = false);

  /// Perceive, query the team policy once, integrate physics_hz/control_hz substeps, then evaluate
  /// termination and reward. Throws std::logic_error on a terminal episode; BridgeFault propagates.
  CycleResult run_control_cycle();

  const WorldState& state() const { return state_; }
  const EvaderTrack& track() const { return track_; }
  const Outcome& outcome() const { return outcome_; }
  const EpisodeConfig& config() const { return cfg_; }
  bool psto_enabled() const { return build_psto_; }
  int circulation() const { return circulation_; }

  /// Frames carrying the latest reward and outcome, without a perception update.
  TeamObservation final_observation() const;

 private:
  TeamObservation observe();
  TeamObservation assemble(bool psto) const;

  EpisodeConfig cfg_;
  RewardWeights weights_;
  EvaderParams evader_params_;
  PursuerTeamPolicy& policy_;
  bool build_psto_;
  const Predictor* predictor_;

  WorldState state_;
  EvaderTrack track_;
  Outcome outcome_;
  RewardBreakdown last_reward_;
  int circulation_ = 1;
  std::vector<double> lidar_clearances_;
};

enum class FaultKind { None, Bridge, Harness };

std::string to_string(FaultKind f);

struct EpisodeResult {
  Outcome outcome;
  std::int64_t cycles = 0;
  FaultKind fault = FaultKind::None;
  std::string fault_message;
  double final_distance = 0.0;
};

/// Runs to a terminal outcome. Faults are caught and reported, never thrown.
/// When log is non-null it receives one record per completed cycle.
EpisodeResult run_episode(const EpisodeConfig& cfg, const RewardWeights& weights, const EvaderParams& evader,
                          PursuerTeamPolicy& policy, TrajectoryLog* log = nullptr, bool build_psto = false);

}  // namespace pesim
