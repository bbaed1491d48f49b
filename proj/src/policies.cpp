#include "pesim/policies.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace pesim {

namespace {

constexpr double kMinSurfaceDistance = 0.05;

VelocityCommand to_body(const Vec3& world, double yaw) {
  const Vec3 b = rotate_z(world, -yaw);
  return {b.x, b.y};
}

Vec3 planar(const Vec3& v) { return {v.x, v.y, 0.0}; }

// Khatib-style magnitude, zero beyond the cutoff.
double barrier(double d, double gain, double cutoff) {
  if (d >= cutoff) return 0.0;
  d = std::max(d, kMinSurfaceDistance);
  return gain * (1.0 / d - 1.0 / cutoff) / (d * d);
}

Vec3 closest_point_on_pillar(const Obstacle& ob, const Vec3& p) {
  return {std::clamp(p.x, ob.center.x - ob.half_extent, ob.center.x + ob.half_extent),
          std::clamp(p.y, ob.center.y - ob.half_extent, ob.center.y + ob.half_extent), p.z};
}

Vec3 away_from_pillar(const Obstacle& ob, const Vec3& p) {
  Vec3 n = planar(p - closest_point_on_pillar(ob, p));
  if (n.norm() < 1e-12) n = planar(p - ob.center);
  return unit_or_zero(n);
}

Vec3 teammate_push(const PursuerObservation& obs, double gain, double cutoff) {
  Vec3 f;
  for (const auto& mate : obs.teammates) {
    const Vec3 d = planar(obs.self.position - mate.position);
    const double dist = d.norm();
    if (dist >= cutoff) continue;
    Vec3 dir = unit_or_zero(d);
    if (dir.norm() == 0.0) {
      // Coincident agents: split deterministically by id.
      const Vec3 to_e = unit_or_zero(planar(obs.evader_position - obs.self.position));
      const double s = obs.self_id < mate.id ? 1.0 : -1.0;
      dir = Vec3{-to_e.y, to_e.x, 0.0} * s;
      if (dir.norm() == 0.0) dir = Vec3{0.0, s, 0.0};
    }
    f += dir * barrier(dist, gain, cutoff);
  }
  return f;
}

// Scales a force to v_max, saturating once it reaches the reference magnitude.
Vec3 saturate(const Vec3& f, double reference, double v_max) {
  const double n = f.norm();
  if (n < 1e-12) return {};
  return f * (v_max / std::max(n, reference));
}

}  // namespace

Vec3 surface_repulsion(const Vec3& p, const std::vector<Obstacle>& obstacles, double arena_radius,
                       const RepulsionGains& g) {
  Vec3 f;
  const double rho = p.norm_xy();
  const double wall = arena_radius - rho;
  if (rho > 1e-12) f += Vec3{-p.x / rho, -p.y / rho, 0.0} * barrier(wall, g.wall_gain, g.wall_cutoff);
  for (const auto& ob : obstacles) {
    const double d = ob.distance_xy(p);
    if (d >= g.pillar_cutoff) continue;
    f += away_from_pillar(ob, p) * barrier(d, g.pillar_gain, g.pillar_cutoff);
  }
  return f;
}

VelocityCommand apf_pursuer(const PursuerObservation& obs, const ApfParams& params) {
  const Vec3 p = obs.self.position;
  Vec3 force = unit_or_zero(planar(obs.evader_position - p)) * params.attraction_gain;
  force += surface_repulsion(p, obs.obstacles, obs.arena_radius,
                             {params.obstacle_gain, params.obstacle_cutoff, params.wall_gain, params.wall_cutoff});
  force += teammate_push(obs, params.teammate_gain, params.teammate_cutoff);
  const Vec3 v = saturate(force, params.saturation, obs.v_max);
  return clamp_command(to_body(v, obs.self.yaw), obs.v_max);
}

VelocityCommand angelani_pursuer(const PursuerObservation& obs, const AngelaniParams& params) {
  const Vec3 p = obs.self.position;
  Vec3 force = unit_or_zero(planar(obs.evader_position - p)) * params.target_weight;

  Vec3 heading_sum;
  int aligned = 0;
  for (const auto& mate : obs.teammates) {
    if ((mate.position - p).norm() > params.neighbor_radius) continue;
    const Vec3 h = unit_or_zero(planar(mate.velocity), 1e-6);
    if (h.norm() == 0.0) continue;
    heading_sum += h;
    ++aligned;
  }
  if (aligned > 0) force += heading_sum / aligned * params.alignment_weight;

  force += teammate_push(obs, params.separation_weight, params.separation_radius);
  force += surface_repulsion(p, obs.obstacles, obs.arena_radius,
                             {params.obstacle_gain, params.obstacle_cutoff, params.wall_gain, params.wall_cutoff});

  const Vec3 v = unit_or_zero(force) * obs.v_max;
  return clamp_command(to_body(v, obs.self.yaw), obs.v_max);
}

Vec3 janosov_aim_point(const PursuerObservation& obs, const JanosovParams& params) {
  const double dist = planar(obs.evader_position - obs.self.position).norm();
  const double lead = std::min(dist / obs.v_max, params.prediction_cap);
  return obs.evader_position + planar(obs.evader_velocity) * lead;
}

VelocityCommand janosov_pursuer(const PursuerObservation& obs, const JanosovParams& params) {
  const Vec3 p = obs.self.position;
  const Vec3 aim_dir = unit_or_zero(planar(janosov_aim_point(obs, params) - p));
  Vec3 force = aim_dir;

  // Viscous damping of the own velocity across the aim line.
  const Vec3 v = planar(obs.self.velocity);
  const Vec3 v_across = v - aim_dir * v.dot(aim_dir);
  force -= v_across * (params.damping / obs.v_max);

  force += surface_repulsion(p, obs.obstacles, obs.arena_radius,
                             {params.obstacle_gain, params.obstacle_cutoff, params.wall_gain, params.wall_cutoff});
  force += teammate_push(obs, params.teammate_gain, params.teammate_cutoff);
  const Vec3 cmd = saturate(force, 1.0, obs.v_max);
  return clamp_command(to_body(cmd, obs.self.yaw), obs.v_max);
}

EvaderDecision evader_policy(const EvaderObservation& obs, const EvaderParams& params) {
  static const Arena kOpen{};
  const Arena& arena = obs.arena ? *obs.arena : kOpen;
  const Vec3 e = planar(obs.self.position);
  EvaderDecision out;
  out.circulation = obs.circulation >= 0 ? 1 : -1;

  // Flee: inverse-distance weighted sum of directions away from each pursuer.
  Vec3 flee;
  const NeighborState* nearest = nullptr;
  double nearest_d = std::numeric_limits<double>::infinity();
  for (const auto& p : obs.pursuers) {
    const Vec3 d = e - planar(p.position);
    const double dist = std::max(d.norm(), 0.1);
    flee += unit_or_zero(d) * (params.pursuer_gain / dist);
    if (dist < nearest_d) { nearest_d = dist; nearest = &p; }
  }

  // Circulation about the arena centre: move away from the nearest pursuer's angular position,
  // keeping the current sense until the angular gap clearly reverses.
  const double rho = e.norm_xy();
  if (nearest && rho > 1e-9) {
    const Vec3 pn = planar(nearest->position);
    if (pn.norm_xy() > 1e-9) {
      const double gap = wrap_angle(std::atan2(e.y, e.x) - std::atan2(pn.y, pn.x));
      if (gap > params.hysteresis) out.circulation = 1;
      else if (gap < -params.hysteresis) out.circulation = -1;
    }
  }

  Vec3 force = flee;
  const double wall_dist = arena.radius - rho;
  const Vec3 radial = rho > 1e-9 ? Vec3{e.x / rho, e.y / rho, 0.0} : Vec3{1.0, 0.0, 0.0};
  const double flee_mag = flee.norm();

  // Wall: repulsion plus a tangential component that grows toward the surface and
  // keeps up with the repulsion when pressed close.
  const double wall_push = barrier(wall_dist, params.wall_gain, params.wall_cutoff);
  force += radial * -wall_push;
  if (wall_dist < params.tangential_band) {
    const Vec3 tangent = Vec3{-radial.y, radial.x, 0.0} * static_cast<double>(out.circulation);
    const double w = 1.0 - wall_dist / params.tangential_band;
    force += tangent * (params.tangential_gain * w * std::max({flee_mag, wall_push, 1e-3}));
  }

  // Pillars: repulsion plus a tangent that agrees with the flee direction.
  for (const auto& ob : arena.obstacles) {
    const double d = ob.distance_xy(e);
    if (d >= params.tangential_band && d >= params.obstacle_cutoff) continue;
    const Vec3 n = away_from_pillar(ob, e);
    force += n * barrier(d, params.obstacle_gain, params.obstacle_cutoff);
    if (d < params.tangential_band) {
      Vec3 t{-n.y, n.x, 0.0};
      if (t.dot(flee) < 0.0) t = -t;
      const double w = 1.0 - d / params.tangential_band;
      force += t * (params.tangential_gain * w * std::max(flee_mag, 1e-3));
    }
  }

  Vec3 v = unit_or_zero(force) * obs.speed;

  // Never command into the wall inside the guard band.
  if (wall_dist < params.wall_guard) {
    const double outward = v.dot(radial);
    if (outward > 0.0) v -= radial * outward;
    const Vec3 dir = unit_or_zero(v, 1e-9);
    v = dir.norm() > 0.0 ? dir * obs.speed
                         : Vec3{-radial.y, radial.x, 0.0} * (obs.speed * out.circulation);
  }

  out.command = clamp_command(to_body(v, obs.self.yaw), obs.speed);
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Apf: return "APF";
    case PolicyKind::Angelani: return "Angelani";
    case PolicyKind::Janosov: return "Janosov";
    case PolicyKind::External: return "External";
  }
  return "APF";
}

PolicyKind policy_kind_from_string(const std::string& s) {
  std::string lower;
  for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "apf") return PolicyKind::Apf;
  if (lower == "angelani") return PolicyKind::Angelani;
  if (lower == "janosov") return PolicyKind::Janosov;
  if (lower == "external") return PolicyKind::External;
  throw std::invalid_argument("unknown policy kind '" + s + "'");
}

ScriptedTeamPolicy::ScriptedTeamPolicy(PolicyKind kind, BaselineGains gains)
    : kind_(kind), gains_(std::move(gains)) {
  if (kind == PolicyKind::External) throw std::invalid_argument("external policies need a bridge");
}

std::vector<VelocityCommand> ScriptedTeamPolicy::act(const TeamObservation& obs) {
  std::vector<VelocityCommand> out;
  out.reserve(obs.geometric.size());
  for (const auto& o : obs.geometric) {
    switch (kind_) {
      case PolicyKind::Apf: out.push_back(apf_pursuer(o, gains_.apf)); break;
      case PolicyKind::Angelani: out.push_back(angelani_pursuer(o, gains_.angelani)); break;
      case PolicyKind::Janosov: out.push_back(janosov_pursuer(o, gains_.janosov)); break;
      case PolicyKind::External: break;
    }
  }
  return out;
}

std::unique_ptr<PursuerTeamPolicy> make_scripted_policy(PolicyKind kind, const BaselineGains& gains) {
  return std::make_unique<ScriptedTeamPolicy>(kind, gains);
}

}  // namespace pesim
