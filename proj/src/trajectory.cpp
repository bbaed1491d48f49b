#include "pesim/trajectory.hpp"

#include <fstream>
#include <sstream>

namespace pesim {

namespace {

using nlohmann::json;

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json snap_to_json(const AgentSnapshot& s) {
  return {{"pos", vec_to_json(s.position)}, {"vel", vec_to_json(s.velocity)}, {"yaw", s.yaw}};
}

AgentSnapshot snap_from_json(const json& j) {
  return {vec_from_json(j.at("pos")), vec_from_json(j.at("vel")), j.at("yaw").get<double>()};
}

json cmd_to_json(const VelocityCommand& c) { return json::array({c.vx, c.vy}); }
VelocityCommand cmd_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

bool same_obstacles(const std::vector<Obstacle>& a, const std::vector<Obstacle>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].center == b[i].center) || a[i].half_extent != b[i].half_extent) return false;
  }
  return true;
}

}  // namespace

bool TrajectoryLog::operator==(const TrajectoryLog& o) const {
  return seed == o.seed && policy == o.policy && evader_speed == o.evader_speed &&
         obstacle_count == o.obstacle_count && n_pursuers == o.n_pursuers &&
         same_obstacles(obstacles, o.obstacles) && records == o.records;
}

json reward_to_json(const RewardBreakdown& r) {
  return {{"r_purs", r.r_purs}, {"r_coord", r.r_coord}, {"r_form", r.r_form},    {"r_obs", r.r_obs},
          {"r_time", r.r_time}, {"r_sparse", r.r_sparse}, {"total", r.total}};
}

RewardBreakdown reward_from_json(const json& j) {
  RewardBreakdown r;
  r.r_purs = j.at("r_purs").get<double>();
  r.r_coord = j.at("r_coord").get<double>();
  r.r_form = j.at("r_form").get<double>();
  r.r_obs = j.at("r_obs").get<double>();
  r.r_time = j.at("r_time").get<double>();
  r.r_sparse = j.at("r_sparse").get<double>();
  r.total = j.at("total").get<double>();
  return r;
}

void write_trajectory(const TrajectoryLog& log, std::ostream& out) {
  json obstacles = json::array();
  for (const auto& o : log.obstacles) obstacles.push_back({{"cx", o.center.x}, {"cy", o.center.y}, {"half_extent", o.half_extent}});
  const json header = {{"schema", "pesim.trajectory"}, {"version", kTrajectorySchemaVersion},
                       {"seed", log.seed},             {"policy", log.policy},
                       {"evader_speed", log.evader_speed}, {"obstacle_count", log.obstacle_count},
                       {"n_pursuers", log.n_pursuers}, {"obstacles", obstacles}};
  out << header.dump() << '\n';
  for (const auto& r : log.records) {
    json pursuers = json::array();
    for (const auto& p : r.pursuers) pursuers.push_back(snap_to_json(p));
    json cmds = json::array();
    for (const auto& c : r.commands) cmds.push_back(cmd_to_json(c));
    json rec = {{"tick", r.tick},
                {"pursuers", pursuers},
                {"evader", snap_to_json(r.evader)},
                {"commands", cmds},
                {"evader_command", cmd_to_json(r.evader_command)},
                {"reward", reward_to_json(r.reward)},
                {"outcome", to_string(r.outcome.kind)}};
    if (r.outcome.kind == OutcomeKind::Collision) rec["agent"] = r.outcome.agent;
    out << rec.dump() << '\n';
  }
}

void export_trajectory(const TrajectoryLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write trajectory " + path.string());
  write_trajectory(log, out);
  out.flush();
  if (!out) throw std::runtime_error("write failed for trajectory " + path.string());
}

TrajectoryLog read_trajectory(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trajectory file is empty");
  const json header = json::parse(line);
  if (header.value("schema", "") != "pesim.trajectory") throw std::runtime_error("not a trajectory file");
  if (header.value("version", 0) != kTrajectorySchemaVersion) {
    throw std::runtime_error("unsupported trajectory schema version");
  }
  TrajectoryLog log;
  log.seed = header.at("seed").get<std::uint64_t>();
  log.policy = header.at("policy").get<std::string>();
  log.evader_speed = header.at("evader_speed").get<double>();
  log.obstacle_count = header.at("obstacle_count").get<int>();
  log.n_pursuers = header.at("n_pursuers").get<int>();
  for (const auto& o : header.at("obstacles")) {
    Obstacle ob;
    ob.center = {o.at("cx").get<double>(), o.at("cy").get<double>(), 0.0};
    ob.half_extent = o.at("half_extent").get<double>();
    log.obstacles.push_back(ob);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      TrajectoryRecord r;
      r.tick = j.at("tick").get<std::int64_t>();
      for (const auto& p : j.at("pursuers")) r.pursuers.push_back(snap_from_json(p));
      r.evader = snap_from_json(j.at("evader"));
      for (const auto& c : j.at("commands")) r.commands.push_back(cmd_from_json(c));
      r.evader_command = cmd_from_json(j.at("evader_command"));
      r.reward = reward_from_json(j.at("reward"));
      r.outcome.kind = outcome_kind_from_string(j.at("outcome").get<std::string>());
      r.outcome.agent = j.value("agent", -1);
      log.records.push_back(std::move(r));
    } catch (const std::exception& ex) {
      throw std::runtime_error("malformed trajectory record at line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return log;
}

TrajectoryLog import_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory " + path.string());
  return read_trajectory(in);
}

}  // namespace pesim
