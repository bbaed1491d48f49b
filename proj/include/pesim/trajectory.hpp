#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pesim/rewards.hpp"
#include "pesim/sim.hpp"

namespace pesim {

inline constexpr int kTrajectorySchemaVersion = 1;

struct AgentSnapshot {
  Vec3 position;
  Vec3 velocity;
  double yaw = 0.0;
  bool operator==(const AgentSnapshot&) const = default;
};

/// State after one control cycle plus the commands that produced it.
struct TrajectoryRecord {
  std::int64_t tick = 0;  ///< control cycle index, 1-based
  std::vector<AgentSnapshot> pursuers;
  AgentSnapshot evader;
  std::vector<VelocityCommand> commands;
  VelocityCommand evader_command;
  RewardBreakdown reward;
  Outcome outcome;
  bool operator==(const TrajectoryRecord&) const = default;
};

struct TrajectoryLog {
  std::uint64_t seed = 0;
  std::string policy;
  double evader_speed = 0.0;
  int obstacle_count = 0;
  int n_pursuers = 0;
  std::vector<Obstacle> obstacles;
  std::vector<TrajectoryRecord> records;

  bool operator==(const TrajectoryLog& o) const;
};

/// JSON-lines: a versioned header object, then one object per record.
void write_trajectory(const TrajectoryLog& log, std::ostream& out);
void export_trajectory(const TrajectoryLog& log, const std::filesystem::path& path);

/// Throws std::runtime_error on a missing/unsupported header or malformed record.
TrajectoryLog read_trajectory(std::istream& in);
TrajectoryLog import_trajectory(const std::filesystem::path& path);

nlohmann::json reward_to_json(const RewardBreakdown& r);
RewardBreakdown reward_from_json(const nlohmann::json& j);

}  // namespace pesim
