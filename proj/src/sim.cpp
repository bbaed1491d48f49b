#include "pesim/sim.hpp"

#include <cmath>
#include <random>

#include "pesim/rng.hpp"

namespace pesim {

VelocityCommand clamp_command(VelocityCommand c, double v_max) {
  const double n = c.norm();
  if (n > v_max && n > 0.0) {
    const double s = v_max / n;
    c.vx *= s;
    c.vy *= s;
  }
  return c;
}

std::string to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Running: return "Running";
    case OutcomeKind::Capture: return "Capture";
    case OutcomeKind::Collision: return "Collision";
    case OutcomeKind::Escape: return "Escape";
    case OutcomeKind::Timeout: return "Timeout";
  }
  return "Running";
}

OutcomeKind outcome_kind_from_string(const std::string& s) {
  for (auto k : {OutcomeKind::Running, OutcomeKind::Capture, OutcomeKind::Collision, OutcomeKind::Escape,
                 OutcomeKind::Timeout}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown outcome '" + s + "'");
}

void EpisodeConfig::validate() const {
  if (n_pursuers < 1 || n_pursuers > 4) throw std::invalid_argument("n_pursuers must be in [1, 4]");
  if (!(evader_speed > 0.0) || !(pursuer_vmax > 0.0)) throw std::invalid_argument("speeds must be positive");
  if (obstacle_count < 0) throw std::invalid_argument("obstacle_count must be >= 0");
  if (!(d_cap > 0.0)) throw std::invalid_argument("d_cap must be positive");
  if (!(t_max > 0.0)) throw std::invalid_argument("t_max must be positive");
  if (control_hz <= 0 || physics_hz <= 0 || physics_hz % control_hz != 0) {
    throw std::invalid_argument("physics_hz must be a positive multiple of control_hz");
  }
  if (!(escape_dist > 0.0)) throw std::invalid_argument("escape_dist must be positive (inf disables)");
  if (!(arena_radius > 0.0)) throw std::invalid_argument("arena radius must be positive");
  if (!(obstacle_half_extent > 0.0)) throw std::invalid_argument("obstacle half extent must be positive");
  if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
  if (agent_radius < 0.0 || teammate_collision_dist < 0.0) throw std::invalid_argument("radii must be >= 0");
  if (spawn_retries < 1) throw std::invalid_argument("spawn_retries must be >= 1");
  lidar.validate();
  grid.validate();
  intent.validate();
}

std::int64_t EpisodeConfig::max_cycles() const {
  return static_cast<std::int64_t>(std::llround(t_max * control_hz));
}

// ---------------------------------------------------------------------------

namespace {

Vec3 sample_disc(std::mt19937_64& rng, double radius, double z) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = radius * std::sqrt(u(rng));
  const double a = 2.0 * kPi * u(rng);
  return {r * std::cos(a), r * std::sin(a), z};
}

// Gap between a pillar footprint and a point.
bool pillar_clear_of(const Obstacle& ob, const Vec3& p, double clearance) {
  return ob.distance_xy(p) >= clearance;
}

bool pillars_overlap(const Obstacle& a, const Obstacle& b) {
  const double reach = a.half_extent + b.half_extent;
  return std::abs(a.center.x - b.center.x) < reach && std::abs(a.center.y - b.center.y) < reach;
}

}  // namespace

WorldState spawn_episode(const EpisodeConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, SeedStream::Spawn));

  WorldState state;
  state.arena.radius = cfg.arena_radius;

  // Keep every agent at least this far inside the wall.
  const double wall_margin = cfg.agent_radius + 0.3;
  const double usable = cfg.arena_radius - wall_margin;
  const double lateral0 = -0.5 * (cfg.n_pursuers - 1) * cfg.spawn_spacing;

  bool placed = false;
  for (int attempt = 0; attempt < cfg.spawn_retries && !placed; ++attempt) {
    const Vec3 e = sample_disc(rng, usable, cfg.altitude);
    std::vector<Vec3> line;
    bool ok = true;
    for (int j = 0; j < cfg.n_pursuers; ++j) {
      const Vec3 p{e.x - cfg.spawn_behind, e.y + lateral0 + j * cfg.spawn_spacing, cfg.altitude};
      if (p.norm_xy() > usable) { ok = false; break; }
      line.push_back(p);
    }
    if (!ok) continue;
    state.evader = AgentState{};
    state.evader.position = e;
    state.pursuers.assign(line.size(), AgentState{});
    for (std::size_t j = 0; j < line.size(); ++j) state.pursuers[j].position = line[j];
    placed = true;
  }
  if (!placed) throw SpawnError("could not place the evader and pursuer line inside the arena");

  const double h = cfg.obstacle_half_extent;
  const double centre_limit = cfg.arena_radius - h * std::sqrt(2.0) - 1e-6;
  for (int n = 0; n < cfg.obstacle_count; ++n) {
    bool done = false;
    for (int attempt = 0; attempt < cfg.spawn_retries && !done; ++attempt) {
      Obstacle ob;
      ob.center = sample_disc(rng, centre_limit, 0.0);
      ob.half_extent = h;
      bool ok = pillar_clear_of(ob, state.evader.position, cfg.obstacle_spawn_clearance);
      for (const auto& p : state.pursuers) ok = ok && pillar_clear_of(ob, p.position, cfg.obstacle_spawn_clearance);
      for (const auto& other : state.arena.obstacles) ok = ok && !pillars_overlap(ob, other);
      if (ok) {
        state.arena.obstacles.push_back(ob);
        done = true;
      }
    }
    if (!done) throw SpawnError("obstacle placement failed after " + std::to_string(cfg.spawn_retries) +
                                " retries (arena overcrowded)");
  }
  return state;
}

// ---------------------------------------------------------------------------

namespace {

void track_velocity(AgentState& a, const Vec3& cmd_world, double v_max, double tau, double dt) {
  Vec3 cmd{cmd_world.x, cmd_world.y, 0.0};
  const double cn = cmd.norm();
  if (cn > v_max) cmd *= v_max / cn;
  const double alpha = tau > 0.0 ? 1.0 - std::exp(-dt / tau) : 1.0;
  a.velocity += (cmd - a.velocity) * alpha;
  const double vn = a.velocity.norm();
  if (vn > v_max) a.velocity *= v_max / vn;
  a.position += a.velocity * dt;

  constexpr double kHeadingSpeed = 1e-3;
  if (a.velocity.norm_xy() > kHeadingSpeed) {
    const double new_yaw = std::atan2(a.velocity.y, a.velocity.x);
    a.yaw_rate = wrap_angle(new_yaw - a.yaw) / dt;
    a.yaw = wrap_angle(new_yaw);
  } else {
    a.yaw_rate = 0.0;
  }
}

// The scripted evader slides along surfaces instead of terminating on contact.
void resolve_evader_contacts(AgentState& e, const Arena& arena, double radius) {
  const double limit = arena.radius - radius;
  const double rho = e.position.norm_xy();
  if (rho > limit && rho > 0.0) {
    const Vec3 n{e.position.x / rho, e.position.y / rho, 0.0};
    e.position.x = n.x * limit;
    e.position.y = n.y * limit;
    const double vn = e.velocity.dot(n);
    if (vn > 0.0) e.velocity -= n * vn;
  }
  for (const auto& ob : arena.obstacles) {
    const double reach = ob.half_extent + radius;
    const double dx = e.position.x - ob.center.x;
    const double dy = e.position.y - ob.center.y;
    const double px = reach - std::abs(dx);
    const double py = reach - std::abs(dy);
    if (px <= 0.0 || py <= 0.0) continue;
    if (px < py) {
      const double s = dx >= 0.0 ? 1.0 : -1.0;
      e.position.x = ob.center.x + s * reach;
      if (e.velocity.x * s < 0.0) e.velocity.x = 0.0;
    } else {
      const double s = dy >= 0.0 ? 1.0 : -1.0;
      e.position.y = ob.center.y + s * reach;
      if (e.velocity.y * s < 0.0) e.velocity.y = 0.0;
    }
  }
}

void check_finite(const Vec3& v) {
  if (!v.finite()) throw std::invalid_argument("non-finite velocity command");
}

}  // namespace

void advance_physics(WorldState& state, const WorldCommands& commands, const EpisodeConfig& cfg, double dt) {
  if (commands.pursuers.size() != state.pursuers.size()) {
    throw std::invalid_argument("one command per pursuer required");
  }
  for (const auto& c : commands.pursuers) check_finite(c);
  check_finite(commands.evader);

  for (std::size_t i = 0; i < state.pursuers.size(); ++i) {
    track_velocity(state.pursuers[i], commands.pursuers[i], cfg.pursuer_vmax, cfg.tau, dt);
  }
  track_velocity(state.evader, commands.evader, cfg.evader_speed, cfg.tau, dt);
  resolve_evader_contacts(state.evader, state.arena, cfg.agent_radius);
  ++state.tick;
}

WorldState step_physics_world(const WorldState& state, const WorldCommands& commands,
                              const EpisodeConfig& cfg, double dt) {
  WorldState next = state;
  advance_physics(next, commands, cfg, dt);
  return next;
}

WorldState step_physics(const WorldState& state, std::span<const VelocityCommand> pursuer_cmds,
                        const VelocityCommand& evader_cmd, const EpisodeConfig& cfg, double dt) {
  if (pursuer_cmds.size() != state.pursuers.size()) {
    throw std::invalid_argument("one command per pursuer required");
  }
  WorldCommands wc;
  for (std::size_t i = 0; i < pursuer_cmds.size(); ++i) {
    wc.pursuers.push_back(rotate_z({pursuer_cmds[i].vx, pursuer_cmds[i].vy, 0.0}, state.pursuers[i].yaw));
  }
  wc.evader = rotate_z({evader_cmd.vx, evader_cmd.vy, 0.0}, state.evader.yaw);
  return step_physics_world(state, wc, cfg, dt);
}

double min_pursuer_evader_distance(const WorldState& state) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : state.pursuers) best = std::min(best, (p.position - state.evader.position).norm());
  return best;
}

Outcome check_termination(const WorldState& state, const EpisodeConfig& cfg) {
  for (std::size_t i = 0; i < state.pursuers.size(); ++i) {
    const Vec3& p = state.pursuers[i].position;
    if (distance_to_nearest_obstacle(p, state.arena) < cfg.agent_radius) {
      return Outcome::collision(static_cast<int>(i));
    }
    for (std::size_t j = i + 1; j < state.pursuers.size(); ++j) {
      if ((p - state.pursuers[j].position).norm() < cfg.teammate_collision_dist) {
        return Outcome::collision(static_cast<int>(i));
      }
    }
  }
  const double d = min_pursuer_evader_distance(state);
  if (d < cfg.d_cap) return Outcome::capture();
  if (d > cfg.escape_dist) return Outcome::escape();
  if (state.cycle >= cfg.max_cycles()) return Outcome::timeout();
  return Outcome::running();
}

bool observable(const Vec3& evader, std::span<const AgentState> pursuers, const Arena& arena, double r_max) {
  for (const auto& p : pursuers) {
    if ((evader - p.position).norm() <= r_max && line_of_sight(p.position, evader, arena)) return true;
  }
  return false;
}

ProprioVector build_proprio(const AgentState& agent) {
  const Vec3 v_body = rotate_z(agent.velocity, -agent.yaw);
  return {std::cos(agent.yaw / 2.0), 0.0, 0.0, std::sin(agent.yaw / 2.0),
          v_body.x, v_body.y, v_body.z,
          0.0, 0.0, agent.yaw_rate,
          agent.prev_action.vx, agent.prev_action.vy};
}

}  // namespace pesim
