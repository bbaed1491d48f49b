#include "pesim/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

namespace pesim {

Spherical cartesian_to_spherical(const Vec3& p) {
  const double r = p.norm();
  if (!(r > 0.0)) throw DegeneratePointError();
  Spherical s;
  s.range = r;
  s.elevation = std::asin(std::clamp(p.z / r, -1.0, 1.0));
  if (p.x == 0.0 && p.y == 0.0) {
    s.azimuth = 0.0;
  } else {
    s.azimuth = std::atan2(p.y, p.x);
    if (s.azimuth >= kPi) s.azimuth = -kPi;
  }
  return s;
}

double Obstacle::distance_xy(const Vec3& p) const {
  const double dx = std::max(std::abs(p.x - center.x) - half_extent, 0.0);
  const double dy = std::max(std::abs(p.y - center.y) - half_extent, 0.0);
  return std::hypot(dx, dy);
}

bool Obstacle::contains_xy(const Vec3& p, double inflation) const {
  const double h = half_extent + inflation;
  return std::abs(p.x - center.x) <= h && std::abs(p.y - center.y) <= h;
}

void Arena::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("arena radius must be positive and finite");
  }
  for (const auto& o : obstacles) {
    if (!(o.half_extent > 0.0)) throw std::invalid_argument("obstacle half_extent must be positive");
    // Farthest footprint corner must stay inside the wall.
    const double far = std::hypot(std::abs(o.center.x) + o.half_extent,
                                  std::abs(o.center.y) + o.half_extent);
    if (far >= radius) throw std::invalid_argument("obstacle extends beyond the arena wall");
  }
}

void LidarConfig::validate() const {
  if (!(r_max > 0.0)) throw std::invalid_argument("lidar r_max must be positive");
  if (azimuth_samples <= 0) throw std::invalid_argument("lidar azimuth_samples must be positive");
  if (horizontal_fov_deg != 360.0) throw std::invalid_argument("lidar horizontal FOV must be 360");
  if (vertical_fov_min_deg < -10.0 || vertical_fov_max_deg > 20.0 ||
      vertical_fov_min_deg >= vertical_fov_max_deg) {
    throw std::invalid_argument("lidar vertical FOV must be a sub-range of [-10, 20] degrees");
  }
  for (double e : elevations_deg) {
    if (e < vertical_fov_min_deg || e > vertical_fov_max_deg) {
      throw std::invalid_argument("lidar elevation outside the vertical FOV");
    }
  }
  if (range_noise_sigma < 0.0) throw std::invalid_argument("lidar noise sigma must be >= 0");
}

namespace {

// Slab test against one pillar footprint; returns entry distance t >= 0 if hit.
std::optional<double> ray_box(const Vec3& o, const Vec3& d, const Obstacle& box) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  const double lo[2] = {box.center.x - box.half_extent, box.center.y - box.half_extent};
  const double hi[2] = {box.center.x + box.half_extent, box.center.y + box.half_extent};
  const double oo[2] = {o.x, o.y};
  const double dd[2] = {d.x, d.y};
  for (int axis = 0; axis < 2; ++axis) {
    if (dd[axis] == 0.0) {
      if (oo[axis] < lo[axis] || oo[axis] > hi[axis]) return std::nullopt;
      continue;
    }
    double t1 = (lo[axis] - oo[axis]) / dd[axis];
    double t2 = (hi[axis] - oo[axis]) / dd[axis];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  if (t_near > t_far || t_far < 0.0) return std::nullopt;
  return std::max(t_near, 0.0);
}

// Exit distance of a ray starting inside the circle.
double ray_wall(const Vec3& o, const Vec3& d, double radius) {
  const double a = d.x * d.x + d.y * d.y;
  const double b = 2.0 * (o.x * d.x + o.y * d.y);
  const double c = o.x * o.x + o.y * o.y - radius * radius;
  const double disc = std::max(b * b - 4.0 * a * c, 0.0);
  return (-b + std::sqrt(disc)) / (2.0 * a);
}

}  // namespace

std::optional<double> cast_ray_xy(const Vec3& origin, const Vec3& dir, const Arena& arena,
                                  double max_range) {
  double best = ray_wall(origin, dir, arena.radius);
  for (const auto& ob : arena.obstacles) {
    if (auto t = ray_box(origin, dir, ob); t && *t < best) best = *t;
  }
  if (best > max_range) return std::nullopt;
  return best;
}

PointCloud raycast_lidar(const AgentPose& pose, const Arena& arena, const LidarConfig& cfg,
                         std::uint64_t noise_seed) {
  if (!arena.inside(pose.position)) throw std::invalid_argument("lidar pose is outside the arena");

  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, cfg.range_noise_sigma > 0.0 ? cfg.range_noise_sigma : 1.0);
  cfg.validate();

  std::vector<double> tan_el;
  std::vector<double> cos_el;
  tan_el.reserve(cfg.elevations_deg.size());
  cos_el.reserve(cfg.elevations_deg.size());
  for (double e : cfg.elevations_deg) {
    tan_el.push_back(std::tan(deg2rad(e)));
    cos_el.push_back(std::cos(deg2rad(e)));
  }

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(cfg.azimuth_samples) * cfg.elevations_deg.size());
  const double step = 2.0 * kPi / cfg.azimuth_samples;
  for (int i = 0; i < cfg.azimuth_samples; ++i) {
    // Half-sample offset keeps rays off the grid's 3-degree column boundaries.
    const double az = -kPi + (i + 0.5) * step;
    const Vec3 dir_body{std::cos(az), std::sin(az), 0.0};
    const Vec3 dir_world = rotate_z(dir_body, pose.yaw);
    const auto hit = cast_ray_xy(pose.position, dir_world, arena, cfg.r_max);
    if (!hit) continue;
    for (std::size_t e = 0; e < tan_el.size(); ++e) {
      double range = *hit / cos_el[e];
      if (cfg.range_noise_sigma > 0.0) range += noise(rng);
      if (range > cfg.r_max || range <= 0.0) continue;
      const double horiz = range * cos_el[e];
      cloud.points.push_back({horiz * dir_body.x, horiz * dir_body.y, horiz * tan_el[e]});
    }
  }
  return cloud;
}

double distance_to_nearest_obstacle(const Vec3& p, const Arena& arena) {
  double d = std::max(arena.radius - p.norm_xy(), 0.0);
  for (const auto& ob : arena.obstacles) d = std::min(d, ob.distance_xy(p));
  return d;
}

bool line_of_sight(const Vec3& a, const Vec3& b, const Arena& arena) {
  const Vec3 delta{b.x - a.x, b.y - a.y, 0.0};
  const double len = delta.norm();
  for (const auto& ob : arena.obstacles) {
    if (len == 0.0) {
      if (ob.contains_xy(a)) return false;
      continue;
    }
    if (auto t = ray_box(a, delta / len, ob); t && *t <= len) return false;
  }
  return true;
}

Arena arena_from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Arena arena;
  arena.radius = j.at("radius").get<double>();
  if (j.contains("obstacles")) {
    for (const auto& o : j.at("obstacles")) {
      Obstacle ob;
      ob.center = {o.at("cx").get<double>(), o.at("cy").get<double>(), 0.0};
      ob.half_extent = o.value("half_extent", Obstacle::kDefaultHalfExtent);
      arena.obstacles.push_back(ob);
    }
  }
  arena.validate();
  return arena;
}

std::string arena_to_json_text(const Arena& arena) {
  nlohmann::json j;
  j["radius"] = arena.radius;
  j["obstacles"] = nlohmann::json::array();
  for (const auto& o : arena.obstacles) {
    j["obstacles"].push_back({{"cx", o.center.x}, {"cy", o.center.y}, {"half_extent", o.half_extent}});
  }
  return j.dump(2);
}

Arena load_arena(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open arena file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return arena_from_json_text(ss.str());
}

}  // namespace pesim
