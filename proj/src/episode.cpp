#include "pesim/episode.hpp"

#include <cmath>

#include "pesim/rng.hpp"

namespace pesim {

std::string to_string(FaultKind f) {
  switch (f) {
    case FaultKind::None: return "none";
    case FaultKind::Bridge: return "bridge";
    case FaultKind::Harness: return "harness";
  }
  return "none";
}

Episode::Episode(EpisodeConfig cfg, RewardWeights weights, EvaderParams evader_params, PursuerTeamPolicy& policy,
                 bool build_psto)
    : cfg_(std::move(cfg)),
      weights_(weights),
      evader_params_(evader_params),
      policy_(policy),
      build_psto_(build_psto || policy.needs_psto()),
      predictor_(&PredictorRegistry::instance().get(cfg_.predictor)),
      state_(spawn_episode(cfg_)),
      track_(cfg_.intent.history_window) {
  weights_.validate();
  // The evader starts in plain view 3.5 m ahead of the team.
  track_.seed(state_.evader.position, cfg_.intent.horizon);
}

TeamObservation Episode::observe() {
  const bool seen = observable(state_.evader.position, state_.pursuers, state_.arena, cfg_.lidar.r_max);
  effective_evader_position(track_, seen ? std::optional<Vec3>(state_.evader.position) : std::nullopt);
  track_.set_prediction(predict_evader(track_, *predictor_, cfg_.intent.horizon, cfg_.intent.dt));
  return assemble(build_psto_);
}

TeamObservation Episode::assemble(bool psto) const {
  const auto n = state_.pursuers.size();
  const double r_max = cfg_.lidar.r_max;
  TeamObservation obs;
  obs.cycle = state_.cycle;
  obs.geometric.resize(n);
  obs.frames.resize(n);

  Vec3 evader_velocity = state_.evader.velocity;
  if (!track_.observable_now()) {
    const auto& h = track_.history();
    evader_velocity = h.size() >= 2 ? (h.back() - h[h.size() - 2]) / cfg_.control_dt() : Vec3{};
  }

  for (std::size_t i = 0; i < n; ++i) {
    const AgentState& self = state_.pursuers[i];
    auto& g = obs.geometric[i];
    g.self_id = static_cast<int>(i);
    g.self = self;
    g.v_max = cfg_.pursuer_vmax;
    g.evader_position = track_.current();
    g.evader_velocity = evader_velocity;
    g.arena_radius = state_.arena.radius;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const AgentState& mate = state_.pursuers[j];
      if ((mate.position - self.position).norm() <= r_max) {
        g.teammates.push_back({static_cast<int>(j), mate.position, mate.velocity});
      }
    }
    for (const auto& ob : state_.arena.obstacles) {
      if (ob.distance_xy(self.position) <= r_max) g.obstacles.push_back(ob);
    }

    auto& f = obs.frames[i];
    f.agent_id = static_cast<int>(i);
    f.tick = state_.cycle;
    f.proprio = build_proprio(self);
    f.reward = last_reward_;
    f.outcome = outcome_;
    if (psto) {
      const auto cloud = raycast_lidar(self.pose(), state_.arena, cfg_.lidar,
                                       derive_seed(cfg_.seed, SeedStream::LidarNoise,
                                                   static_cast<std::uint64_t>(state_.cycle) * 8 + i));
      std::vector<TeammateState> mates;
      for (const auto& nb : g.teammates) mates.push_back({nb.position, nb.velocity});
      f.psto = build_psto(cloud, track_, mates, self.pose(), cfg_.grid, cfg_.intent, r_max);
    }
  }
  return obs;
}

TeamObservation Episode::final_observation() const { return assemble(false); }

CycleResult Episode::run_control_cycle() {
  if (outcome_.terminal()) throw std::logic_error("episode already terminated (" + to_string(outcome_.kind) + ")");

  CycleResult result;
  result.observations = observe();

  if (build_psto_ && weights_.clearance_source == ClearanceSource::LidarMinimum) {
    lidar_clearances_.clear();
    for (const auto& f : result.observations.frames) {
      double best = cfg_.lidar.r_max;
      for (double v : f.psto->lidar.data()) best = std::min(best, cfg_.lidar.r_max - v);
      lidar_clearances_.push_back(best);
    }
  }

  auto cmds = policy_.act(result.observations);
  if (cmds.size() != state_.pursuers.size()) {
    throw std::invalid_argument("policy returned " + std::to_string(cmds.size()) + " commands for " +
                                std::to_string(state_.pursuers.size()) + " pursuers");
  }
  for (auto& c : cmds) {
    if (!std::isfinite(c.vx) || !std::isfinite(c.vy)) throw std::invalid_argument("non-finite pursuer command");
    c = clamp_command(c, cfg_.pursuer_vmax);
  }

  EvaderObservation eobs;
  eobs.self = state_.evader;
  eobs.speed = cfg_.evader_speed;
  eobs.arena = &state_.arena;
  eobs.circulation = circulation_;
  for (std::size_t i = 0; i < state_.pursuers.size(); ++i) {
    eobs.pursuers.push_back({static_cast<int>(i), state_.pursuers[i].position, state_.pursuers[i].velocity});
  }
  const EvaderDecision decision = evader_policy(eobs, evader_params_);
  circulation_ = decision.circulation;

  // Commands are held in the world frame for the whole control period.
  WorldCommands world;
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    world.pursuers.push_back(rotate_z({cmds[i].vx, cmds[i].vy, 0.0}, state_.pursuers[i].yaw));
  }
  world.evader = rotate_z({decision.command.vx, decision.command.vy, 0.0}, state_.evader.yaw);

  const double dt = cfg_.physics_dt();
  for (int s = 0; s < cfg_.substeps(); ++s) advance_physics(state_, world, cfg_, dt);
  ++state_.cycle;
  for (std::size_t i = 0; i < cmds.size(); ++i) state_.pursuers[i].prev_action = cmds[i];
  state_.evader.prev_action = decision.command;

  outcome_ = check_termination(state_, cfg_);
  last_reward_ = total_reward(state_, weights_, outcome_, lidar_clearances_);

  result.commands = std::move(cmds);
  result.evader_command = decision.command;
  result.reward = last_reward_;
  result.outcome = outcome_;
  return result;
}

namespace {

AgentSnapshot snapshot(const AgentState& a) { return {a.position, a.velocity, a.yaw}; }

}  // namespace

EpisodeResult run_episode(const EpisodeConfig& cfg, const RewardWeights& weights, const EvaderParams& evader,
                          PursuerTeamPolicy& policy, TrajectoryLog* log, bool build_psto) {
  EpisodeResult result;
  if (log) {
    log->seed = cfg.seed;
    log->evader_speed = cfg.evader_speed;
    log->obstacle_count = cfg.obstacle_count;
    log->n_pursuers = cfg.n_pursuers;
    log->records.clear();
  }
  try {
    Episode ep(cfg, weights, evader, policy, build_psto);
    if (log) log->obstacles = ep.state().arena.obstacles;
    policy.begin_episode({cfg.seed, cfg.n_pursuers, cfg.grid});
    while (!ep.outcome().terminal()) {
      CycleResult c = ep.run_control_cycle();
      if (log) {
        TrajectoryRecord rec;
        rec.tick = ep.state().cycle;
        for (const auto& p : ep.state().pursuers) rec.pursuers.push_back(snapshot(p));
        rec.evader = snapshot(ep.state().evader);
        rec.commands = c.commands;
        rec.evader_command = c.evader_command;
        rec.reward = c.reward;
        rec.outcome = c.outcome;
        log->records.push_back(std::move(rec));
      }
    }
    policy.end_episode(ep.final_observation());
    result.outcome = ep.outcome();
    result.cycles = ep.state().cycle;
    result.final_distance = min_pursuer_evader_distance(ep.state());
  } catch (const BridgeFault& ex) {
    result.fault = FaultKind::Bridge;
    result.fault_message = ex.what();
  } catch (const std::exception& ex) {
    result.fault = FaultKind::Harness;
    result.fault_message = ex.what();
  }
  return result;
}

}  // namespace pesim
