#pragma once

// Naive per-cell reference encoder. Every cell scans the whole point set and tests the
// point's angles against the cell's own bounds, so it shares no indexing code with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "pesim/psto.hpp"

namespace pesim::testing {

struct CellBounds {
  double az_lo, az_hi, el_lo, el_hi;
};

inline CellBounds cell_bounds(const GridConfig& g, int row, int col) {
  return {g.azimuth_min + col * g.azimuth_step, g.azimuth_min + (col + 1) * g.azimuth_step,
          g.elevation_min + row * g.elevation_step, g.elevation_min + (row + 1) * g.elevation_step};
}

struct Angles {
  bool valid = false;
  double az = 0.0, el = 0.0, r = 0.0;
};

inline Angles angles_of(const Vec3& p) {
  Angles a;
  a.r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
  if (a.r == 0.0) return a;
  a.valid = true;
  a.el = std::asin(std::clamp(p.z / a.r, -1.0, 1.0));
  a.az = (p.x == 0.0 && p.y == 0.0) ? 0.0 : std::atan2(p.y, p.x);
  if (a.az >= kPi) a.az -= 2.0 * kPi;
  return a;
}

inline bool in_cell(const Angles& a, const CellBounds& b) {
  return a.valid && a.az >= b.az_lo && a.az < b.az_hi && a.el >= b.el_lo && a.el < b.el_hi;
}

// lambda^k by repeated multiplication.
inline double decay(double lambda, int k) {
  double f = 1.0;
  for (int i = 0; i < k; ++i) f *= lambda;
  return f;
}

inline double psi(const Vec3& p, int k, double strength, double lambda, double floor) {
  const double r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
  return strength / (r < floor ? floor : r) * decay(lambda, k);
}

inline Grid brute_lidar(const std::vector<Vec3>& pts, const GridConfig& g, double r_max) {
  std::vector<Angles> ang;
  for (const auto& p : pts) ang.push_back(angles_of(p));
  Grid out(g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const auto b = cell_bounds(g, r, c);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& a : ang) {
        if (in_cell(a, b)) best = std::min(best, a.r);
      }
      out.at(r, c) = std::isfinite(best) ? r_max - best : 0.0;
    }
  }
  return out;
}

inline Grid brute_evader(std::span<const StepPoint> pts, const GridConfig& g, const IntentParams& ip) {
  std::vector<Angles> ang;
  for (const auto& sp : pts) ang.push_back(angles_of(sp.p));
  Grid out(g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const auto b = cell_bounds(g, r, c);
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& sp = pts[i];
        if (in_cell(ang[i], b)) best = std::max(best, psi(sp.p, sp.k, ip.evader_strength, ip.evader_decay, ip.distance_floor));
      }
      out.at(r, c) = std::isfinite(best) ? best : 0.0;
    }
  }
  return out;
}

inline Grid brute_teammate(std::span<const StepPoint> pts, const GridConfig& g, const IntentParams& ip) {
  std::vector<Angles> ang;
  for (const auto& sp : pts) ang.push_back(angles_of(sp.p));
  Grid out(g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const auto b = cell_bounds(g, r, c);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& sp = pts[i];
        if (in_cell(ang[i], b)) best = std::min(best, -psi(sp.p, sp.k, ip.teammate_strength, ip.teammate_decay, ip.distance_floor));
      }
      out.at(r, c) = std::isfinite(best) ? best : 0.0;
    }
  }
  return out;
}

// Full two-channel reference: evader points are the current position plus the rollout,
// teammate points their current position plus p + v*k*dt for k = 1..horizon.
inline PstoTensor brute_psto(const std::vector<Vec3>& cloud, const Vec3& evader_now, const std::vector<Vec3>& rollout,
                             const std::vector<TeammateState>& mates, const AgentPose& ego, const GridConfig& g,
                             const IntentParams& ip, double r_max) {
  auto body = [&](const Vec3& w) {
    const Vec3 d = w - ego.position;
    const double c = std::cos(ego.yaw), s = std::sin(ego.yaw);
    return Vec3{c * d.x + s * d.y, -s * d.x + c * d.y, d.z};
  };
  std::vector<StepPoint> ev{{body(evader_now), 0}};
  for (std::size_t i = 0; i < rollout.size(); ++i) ev.push_back({body(rollout[i]), static_cast<int>(i) + 1});
  std::vector<StepPoint> tm;
  for (const auto& m : mates) {
    for (int k = 0; k <= ip.horizon; ++k) {
      tm.push_back({body({m.position.x + m.velocity.x * k * ip.dt, m.position.y + m.velocity.y * k * ip.dt,
                          m.position.z + m.velocity.z * k * ip.dt}),
                    k});
    }
  }
  PstoTensor t;
  t.lidar = brute_lidar(cloud, g, r_max);
  const Grid e = brute_evader(ev, g, ip);
  const Grid m = brute_teammate(tm, g, ip);
  t.intent = Grid(g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) t.intent.at(r, c) = e.at(r, c) + m.at(r, c);
  }
  return t;
}

inline double max_abs_diff(const Grid& a, const Grid& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace pesim::testing
