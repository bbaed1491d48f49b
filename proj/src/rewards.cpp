#include "pesim/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pesim {

void RewardWeights::validate() const {
  if (!(sigma_coord > 0.0)) throw std::invalid_argument("sigma_coord must be positive");
  if (!(d_safety > 0.0)) throw std::invalid_argument("d_safety must be positive");
  if (!(r_cap > 0.0)) throw std::invalid_argument("R_cap must be positive");
  if (r_coll > 0.0 || r_esc > 0.0 || r_out > 0.0) {
    throw std::invalid_argument("R_coll, R_esc and R_out must be <= 0");
  }
}

double pursuit_reward(std::span<const AgentState> pursuers, const AgentState& evader) {
  if (pursuers.empty()) throw std::invalid_argument("pursuit reward needs at least one pursuer");
  double sum = 0.0;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& p : pursuers) {
    const Vec3 u = unit_or_zero(evader.position - p.position);
    const double closing = (p.velocity - evader.velocity).dot(u);
    sum += closing;
    worst = std::min(worst, closing);
  }
  return sum / static_cast<double>(pursuers.size()) + worst;
}

double coordination_reward(std::span<const AgentState> pursuers, double d_des, double sigma) {
  if (pursuers.size() < 2) return 1.0;
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < pursuers.size(); ++i) {
    for (std::size_t j = i + 1; j < pursuers.size(); ++j) {
      sum += (pursuers[i].position - pursuers[j].position).norm();
      ++pairs;
    }
  }
  const double mean = sum / pairs;
  const double z = mean - d_des;
  return std::exp(-(z * z) / (2.0 * sigma * sigma));
}

double formation_reward(std::span<const AgentState> pursuers, const AgentState& evader) {
  if (pursuers.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pursuers.size(); ++i) {
    std::size_t nearest = i;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pursuers.size(); ++j) {
      if (j == i) continue;
      const double d = (pursuers[j].position - pursuers[i].position).norm();
      if (d < best) { best = d; nearest = j; }
    }
    const Vec3 to_mate = pursuers[nearest].position - pursuers[i].position;
    const Vec3 to_evader = evader.position - pursuers[i].position;
    if (to_mate.norm() < 1e-12 || to_evader.norm() < 1e-12) continue;  // dot treated as 1
    const double c = std::clamp(unit_or_zero(to_mate).dot(unit_or_zero(to_evader)), -1.0, 1.0);
    sum += std::acos(c);
  }
  return sum / static_cast<double>(pursuers.size());
}

double safety_reward(std::span<const double> clearances, double d_safety) {
  if (clearances.empty()) return 0.0;
  constexpr double kFloor = 1e-3;
  double sum = 0.0;
  for (double d : clearances) sum += std::log(std::clamp(d / d_safety, kFloor, 1.0));
  return sum / static_cast<double>(clearances.size());
}

std::vector<double> true_clearances(std::span<const AgentState> pursuers, const Arena& arena) {
  std::vector<double> out;
  out.reserve(pursuers.size());
  for (const auto& p : pursuers) out.push_back(distance_to_nearest_obstacle(p.position, arena));
  return out;
}

double terminal_reward(const Outcome& outcome, const RewardWeights& w) {
  switch (outcome.kind) {
    case OutcomeKind::Running: return 0.0;
    case OutcomeKind::Capture: return w.r_cap;
    case OutcomeKind::Collision: return w.r_coll;
    case OutcomeKind::Escape: return w.r_esc;
    case OutcomeKind::Timeout: return w.r_out;
  }
  return 0.0;
}

RewardBreakdown total_reward(const WorldState& state, const RewardWeights& w, const Outcome& outcome,
                             std::span<const double> lidar_clearances) {
  RewardBreakdown r;
  r.r_purs = pursuit_reward(state.pursuers, state.evader);
  r.r_coord = coordination_reward(state.pursuers, w.d_des, w.sigma_coord);
  r.r_form = formation_reward(state.pursuers, state.evader);
  if (w.clearance_source == ClearanceSource::LidarMinimum && lidar_clearances.size() == state.pursuers.size()) {
    r.r_obs = safety_reward(lidar_clearances, w.d_safety);
  } else {
    r.r_obs = safety_reward(true_clearances(state.pursuers, state.arena), w.d_safety);
  }
  r.r_time = -1.0;
  r.r_sparse = terminal_reward(outcome, w);
  r.total = w.w_purs * r.r_purs + w.w_coord * r.r_coord + w.w_form * r.r_form + w.w_obs * r.r_obs +
            w.w_time * r.r_time + r.r_sparse;
  return r;
}

}  // namespace pesim
