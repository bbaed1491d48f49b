#include "pesim/scene.hpp"

#include <fstream>

#include "pesim/psto_io.hpp"

namespace pesim {

using nlohmann::json;

namespace {

Vec3 vec(const json& j) {
  if (!j.is_array() || j.size() < 2 || j.size() > 3) throw std::invalid_argument("expected [x, y] or [x, y, z]");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.size() == 3 ? j.at(2).get<double>() : 0.0};
}

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

}  // namespace

Scene scene_from_json(const json& j) {
  try {
    Scene s;
    if (j.contains("arena")) s.arena = arena_from_json_text(j.at("arena").dump());
    const auto& ego = j.at("ego");
    s.ego.position = vec(ego.at("position"));
    s.ego.yaw = ego.value("yaw", 0.0);
    for (const auto& p : j.at("evader_history")) s.evader_history.push_back(vec(p));
    if (s.evader_history.empty()) throw std::invalid_argument("evader_history is empty");
    if (j.contains("teammates")) {
      for (const auto& t : j.at("teammates")) {
        s.teammates.push_back({vec(t.at("position")), t.contains("velocity") ? vec(t.at("velocity")) : Vec3{}});
      }
    }
    if (j.contains("intent")) s.intent = intent_params_from_json(j.at("intent"));
    s.lidar.r_max = j.value("r_max", s.lidar.r_max);
    s.predictor = j.value("predictor", s.predictor);
    s.noise_seed = j.value("noise_seed", std::uint64_t{0});
    s.lidar.range_noise_sigma = j.value("range_noise_sigma", 0.0);
    s.intent.validate();
    s.lidar.validate();
    return s;
  } catch (const json::exception& ex) {
    throw std::invalid_argument(std::string("malformed scene: ") + ex.what());
  }
}

json scene_to_json(const Scene& s) {
  json j;
  j["arena"] = json::parse(arena_to_json_text(s.arena));
  j["ego"] = {{"position", vec_json(s.ego.position)}, {"yaw", s.ego.yaw}};
  j["evader_history"] = json::array();
  for (const auto& p : s.evader_history) j["evader_history"].push_back(vec_json(p));
  j["teammates"] = json::array();
  for (const auto& t : s.teammates) {
    j["teammates"].push_back({{"position", vec_json(t.position)}, {"velocity", vec_json(t.velocity)}});
  }
  j["intent"] = intent_params_to_json(s.intent);
  j["r_max"] = s.lidar.r_max;
  j["predictor"] = s.predictor;
  j["noise_seed"] = s.noise_seed;
  j["range_noise_sigma"] = s.lidar.range_noise_sigma;
  return j;
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw std::invalid_argument(path.string() + ": " + ex.what());
  }
  return scene_from_json(j);
}

PstoTensor encode_scene(const Scene& scene) {
  const PointCloud cloud = raycast_lidar(scene.ego, scene.arena, scene.lidar, scene.noise_seed);
  EvaderTrack track(scene.intent.history_window);
  track.seed(scene.evader_history.front(), scene.intent.horizon);
  for (std::size_t i = 1; i < scene.evader_history.size(); ++i) track.push(scene.evader_history[i]);
  if (track.history().size() >= 2) {
    const auto& predictor = PredictorRegistry::instance().get(scene.predictor);
    track.set_prediction(predict_evader(track, predictor, scene.intent.horizon, scene.intent.dt));
  }
  return build_psto(cloud, track, scene.teammates, scene.ego, scene.grid, scene.intent, scene.lidar.r_max);
}

}  // namespace pesim
