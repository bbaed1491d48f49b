#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pesim/geometry.hpp"
#include "pesim/psto.hpp"

namespace pesim {

/// A single-frame encoding scene for golden PSTO dumps.
///
/// JSON layout:
///   { "arena": {"radius": 9, "obstacles": [{"cx":..,"cy":..,"half_extent":..}]},
///     "ego": {"position": [x,y,z], "yaw": rad},
///     "evader_history": [[x,y,z], ...],            // world, oldest first
///     "teammates": [{"position": [..], "velocity": [..]}],
///     "intent": {...}, "r_max": 10, "predictor": "constant-velocity", "noise_seed": 0 }
struct Scene {
  Arena arena;
  AgentPose ego;
  std::vector<Vec3> evader_history;
  std::vector<TeammateState> teammates;
  LidarConfig lidar;
  GridConfig grid;
  IntentParams intent;
  std::string predictor = "constant-velocity";
  std::uint64_t noise_seed = 0;
};

/// Throws std::invalid_argument on missing or malformed fields.
Scene scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const Scene& s);
Scene load_scene(const std::filesystem::path& path);

/// Raycasts the arena from the ego pose, rebuilds the evader track from the history and
/// encodes both channels.
PstoTensor encode_scene(const Scene& scene);

}  // namespace pesim
