#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pesim/psto.hpp"
#include "pesim/rewards.hpp"
#include "pesim/sim.hpp"

namespace pesim {

// ---------------------------------------------------------------------------
// Gains. Defaults are the frozen values tuned at evader speed 0.8 m/s with no
// obstacles (configs/baselines.toml records the same numbers).

struct ApfParams {
  double attraction_gain = 1.0;
  double obstacle_gain = 0.15;
  double obstacle_cutoff = 1.2;   ///< m
  double wall_gain = 3.0;
  double wall_cutoff = 3.0;       ///< m, keeps the team on an inner track along the wall
  double teammate_gain = 1.5;
  double teammate_cutoff = 4.0;   ///< m
  double saturation = 1.0;        ///< force magnitude that maps to full speed
};

struct AngelaniParams {
  double target_weight = 1.0;
  double alignment_weight = 0.3;
  double separation_weight = 1.5;
  double separation_radius = 4.0;  ///< m
  double neighbor_radius = 5.0;    ///< m
  double obstacle_gain = 0.15;
  double obstacle_cutoff = 1.2;
  double wall_gain = 3.0;
  double wall_cutoff = 3.0;
};

struct JanosovParams {
  double prediction_cap = 3.0;   ///< s, upper bound on the lead time
  double damping = 0.3;          ///< weight on the own velocity component across the aim line
  double obstacle_gain = 0.15;
  double obstacle_cutoff = 1.2;
  double wall_gain = 3.0;
  double wall_cutoff = 3.0;
  double teammate_gain = 0.4;
  double teammate_cutoff = 2.0;
};

struct EvaderParams {
  double pursuer_gain = 1.0;
  double wall_gain = 0.6;
  double wall_cutoff = 1.5;       ///< m
  double obstacle_gain = 0.3;
  double obstacle_cutoff = 1.0;   ///< m
  double tangential_gain = 2.0;
  double tangential_band = 2.0;   ///< m, surface distance where the tangential field acts
  double hysteresis = 0.15;       ///< rad, angular gap needed to flip circulation
  double wall_guard = 0.5;        ///< m, band where outward commands are removed
};

struct BaselineGains {
  ApfParams apf;
  AngelaniParams angelani;
  JanosovParams janosov;
  EvaderParams evader;
};

// ---------------------------------------------------------------------------
// Observations

struct NeighborState {
  int id = 0;
  Vec3 position;
  Vec3 velocity;
};

/// Ground-truth local summary handed to the scripted pursuers.
struct PursuerObservation {
  int self_id = 0;
  AgentState self;
  double v_max = 0.8;
  std::vector<NeighborState> teammates;  ///< within sensing range
  Vec3 evader_position;                  ///< effective estimate, last prediction while occluded
  Vec3 evader_velocity;
  std::vector<Obstacle> obstacles;       ///< pillars within sensing range
  double arena_radius = Arena::kDefaultRadius;
};

struct EvaderObservation {
  AgentState self;
  double speed = 0.8;
  std::vector<NeighborState> pursuers;
  const Arena* arena = nullptr;
  int circulation = 1;  ///< +1 counter-clockwise about the arena centre, -1 clockwise
};

/// What a learned policy sees for one pursuer in one control cycle.
struct ObservationFrame {
  int agent_id = 0;
  std::int64_t tick = 0;  ///< control cycle index
  std::optional<PstoTensor> psto;
  ProprioVector proprio{};
  RewardBreakdown reward;  ///< reward of the previous transition
  Outcome outcome;
};

struct TeamObservation {
  std::int64_t cycle = 0;
  std::vector<PursuerObservation> geometric;
  std::vector<ObservationFrame> frames;
};

// ---------------------------------------------------------------------------
// Per-agent controllers. All return body-frame commands with |cmd| <= v_max.

VelocityCommand apf_pursuer(const PursuerObservation& obs, const ApfParams& params);
VelocityCommand angelani_pursuer(const PursuerObservation& obs, const AngelaniParams& params);
VelocityCommand janosov_pursuer(const PursuerObservation& obs, const JanosovParams& params);

struct EvaderDecision {
  VelocityCommand command;
  int circulation = 1;
};

EvaderDecision evader_policy(const EvaderObservation& obs, const EvaderParams& params);

/// Janosov lead point: evader position advanced by its velocity over the capped lead time.
Vec3 janosov_aim_point(const PursuerObservation& obs, const JanosovParams& params);

struct RepulsionGains {
  double pillar_gain = 0.0;
  double pillar_cutoff = 0.0;
  double wall_gain = 0.0;
  double wall_cutoff = 0.0;
};

/// World-frame repulsion from the wall and from pillars, each zero beyond its cutoff.
Vec3 surface_repulsion(const Vec3& p, const std::vector<Obstacle>& obstacles, double arena_radius,
                       const RepulsionGains& gains);

// ---------------------------------------------------------------------------
// Team policies

enum class PolicyKind { Apf, Angelani, Janosov, External };

/// An external policy missed its deadline or replied with garbage. Not a task outcome.
class BridgeFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string to_string(PolicyKind k);
/// Throws std::invalid_argument for unknown names (case-insensitive).
PolicyKind policy_kind_from_string(const std::string& s);

struct EpisodeInfo {
  std::uint64_t seed = 0;
  int n_agents = 0;
  GridConfig grid;
};

class PursuerTeamPolicy {
 public:
  virtual ~PursuerTeamPolicy() = default;
  virtual bool needs_psto() const { return false; }
  virtual void begin_episode(const EpisodeInfo&) {}
  virtual std::vector<VelocityCommand> act(const TeamObservation& obs) = 0;
  virtual void end_episode(const TeamObservation&) {}
};

class ScriptedTeamPolicy : public PursuerTeamPolicy {
 public:
  ScriptedTeamPolicy(PolicyKind kind, BaselineGains gains);
  std::vector<VelocityCommand> act(const TeamObservation& obs) override;

 private:
  PolicyKind kind_;
  BaselineGains gains_;
};

/// Commands every pursuer with the same constant body-frame velocity.
class ConstantTeamPolicy : public PursuerTeamPolicy {
 public:
  explicit ConstantTeamPolicy(VelocityCommand cmd = {}) : cmd_(cmd) {}
  std::vector<VelocityCommand> act(const TeamObservation& obs) override {
    return std::vector<VelocityCommand>(obs.geometric.size(), cmd_);
  }

 private:
  VelocityCommand cmd_;
};

std::unique_ptr<PursuerTeamPolicy> make_scripted_policy(PolicyKind kind, const BaselineGains& gains);

}  // namespace pesim
