#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pesim/geometry.hpp"
#include "pesim/psto.hpp"

namespace pesim {

/// Body-frame planar velocity command (m/s).
struct VelocityCommand {
  double vx = 0.0;
  double vy = 0.0;

  double norm() const { return std::hypot(vx, vy); }
  bool operator==(const VelocityCommand&) const = default;
};

/// Scales the command onto the speed disc of radius v_max.
VelocityCommand clamp_command(VelocityCommand c, double v_max);

struct AgentState {
  Vec3 position;  ///< world
  Vec3 velocity;  ///< world, m/s
  double yaw = 0.0;
  double yaw_rate = 0.0;
  VelocityCommand prev_action;

  AgentPose pose() const { return {position, yaw}; }
  bool operator==(const AgentState&) const = default;
};

/// Attitude quaternion (w, x, y, z), body velocity, body angular rate, previous action.
using ProprioVector = std::array<double, 12>;

enum class OutcomeKind { Running, Capture, Collision, Escape, Timeout };

struct Outcome {
  OutcomeKind kind = OutcomeKind::Running;
  int agent = -1;  ///< pursuer index for Collision, otherwise -1

  bool terminal() const { return kind != OutcomeKind::Running; }
  bool operator==(const Outcome&) const = default;

  static Outcome running() { return {}; }
  static Outcome capture() { return {OutcomeKind::Capture, -1}; }
  static Outcome collision(int id) { return {OutcomeKind::Collision, id}; }
  static Outcome escape() { return {OutcomeKind::Escape, -1}; }
  static Outcome timeout() { return {OutcomeKind::Timeout, -1}; }
};

std::string to_string(OutcomeKind k);
/// Throws std::invalid_argument for unknown names.
OutcomeKind outcome_kind_from_string(const std::string& s);

struct WorldState {
  std::vector<AgentState> pursuers;
  AgentState evader;
  Arena arena;
  std::int64_t tick = 0;   ///< physics steps since spawn
  std::int64_t cycle = 0;  ///< completed control cycles

  bool operator==(const WorldState& o) const {
    return pursuers == o.pursuers && evader == o.evader && tick == o.tick && cycle == o.cycle &&
           arena.radius == o.arena.radius && arena.obstacles.size() == o.arena.obstacles.size() &&
           std::equal(arena.obstacles.begin(), arena.obstacles.end(), o.arena.obstacles.begin(),
                      [](const Obstacle& a, const Obstacle& b) {
                        return a.center == b.center && a.half_extent == b.half_extent;
                      });
  }
};

struct EpisodeConfig {
  int n_pursuers = 2;
  double evader_speed = 0.8;         ///< m/s
  double pursuer_vmax = 0.8;         ///< m/s
  int obstacle_count = 0;
  double d_cap = 1.4;                ///< capture radius, m
  double t_max = 30.0;               ///< s
  int control_hz = 10;
  int physics_hz = 100;
  std::uint64_t seed = 0;
  double escape_dist = std::numeric_limits<double>::infinity();

  double arena_radius = Arena::kDefaultRadius;
  double obstacle_half_extent = Obstacle::kDefaultHalfExtent;
  double altitude = 1.0;             ///< m, shared by every agent
  double spawn_behind = 3.5;         ///< pursuer line distance behind the evader (-x), m
  double spawn_spacing = 1.0;        ///< lateral pursuer spacing, m
  double tau = 0.3;                  ///< velocity tracking time constant, s
  double agent_radius = 0.2;         ///< collision inflation around pillars and wall, m
  double teammate_collision_dist = 0.4;
  double obstacle_spawn_clearance = 1.0;  ///< min gap between pillar footprint and any spawned agent
  int spawn_retries = 1000;

  LidarConfig lidar;
  GridConfig grid;
  IntentParams intent;
  std::string predictor = "constant-velocity";

  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
  int substeps() const { return physics_hz / control_hz; }
  double physics_dt() const { return 1.0 / physics_hz; }
  double control_dt() const { return 1.0 / control_hz; }
  std::int64_t max_cycles() const;
};

class SpawnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evader at a uniform free position, pursuers in a lateral line spawn_behind metres along -x,
/// all facing +x, pillars uniformly placed clear of agents and of each other.
/// Throws SpawnError when placement exhausts its retries.
WorldState spawn_episode(const EpisodeConfig& cfg);

/// World-frame command per agent: pursuers first, evader last.
struct WorldCommands {
  std::vector<Vec3> pursuers;
  Vec3 evader;
};

/// One physics step with world-frame velocity commands held over dt.
/// Throws std::invalid_argument on a non-finite command.
WorldState step_physics_world(const WorldState& state, const WorldCommands& commands,
                              const EpisodeConfig& cfg, double dt);

/// In-place variant of step_physics_world used by the episode loop.
void advance_physics(WorldState& state, const WorldCommands& commands, const EpisodeConfig& cfg, double dt);

/// One physics step with body-frame commands rotated by each agent's current yaw.
WorldState step_physics(const WorldState& state, std::span<const VelocityCommand> pursuer_cmds,
                        const VelocityCommand& evader_cmd, const EpisodeConfig& cfg, double dt);

/// Collision > Capture > Escape > Timeout.
Outcome check_termination(const WorldState& state, const EpisodeConfig& cfg);

/// True iff some pursuer has a clear line of sight to the evader within r_max.
bool observable(const Vec3& evader, std::span<const AgentState> pursuers, const Arena& arena, double r_max);

ProprioVector build_proprio(const AgentState& agent);

double min_pursuer_evader_distance(const WorldState& state);

}  // namespace pesim
