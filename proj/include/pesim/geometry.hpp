#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pesim {

inline constexpr double kPi = std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a >= kPi) a -= 2.0 * kPi;
  if (a < -kPi) a += 2.0 * kPi;
  return a;
}

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
  constexpr bool operator==(const Vec3&) const = default;

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  double norm_xy() const { return std::hypot(x, y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Unit vector along v, or the zero vector when |v| is below eps.
inline Vec3 unit_or_zero(const Vec3& v, double eps = 1e-12) {
  const double n = v.norm();
  return n > eps ? v / n : Vec3{};
}

/// Planar pose: world position plus heading about +z. Body frame is x forward, y left, z up.
struct AgentPose {
  Vec3 position;
  double yaw = 0.0;
};

/// Rotates p about +z by yaw.
inline Vec3 rotate_z(const Vec3& p, double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

/// R(yaw)^T (p - pose.position).
inline Vec3 world_to_body(const Vec3& p, const AgentPose& pose) {
  return rotate_z(p - pose.position, -pose.yaw);
}

inline Vec3 body_to_world(const Vec3& p, const AgentPose& pose) {
  return rotate_z(p, pose.yaw) + pose.position;
}

struct Spherical {
  double range = 0.0;
  double azimuth = 0.0;    ///< atan2(y, x) in [-pi, pi)
  double elevation = 0.0;  ///< asin(z / r) in [-pi/2, pi/2]
};

class DegeneratePointError : public std::domain_error {
 public:
  DegeneratePointError() : std::domain_error("zero-norm point has no spherical direction") {}
};

/// Throws DegeneratePointError on a zero-norm input. Azimuth is 0 at the poles.
Spherical cartesian_to_spherical(const Vec3& p);

/// Axis-aligned square pillar, infinitely tall. z of center is ignored.
struct Obstacle {
  static constexpr double kDefaultHalfExtent = 0.2;

  Vec3 center;
  double half_extent = kDefaultHalfExtent;

  /// Exterior distance from the footprint in the xy-plane; 0 inside.
  double distance_xy(const Vec3& p) const;
  bool contains_xy(const Vec3& p, double inflation = 0.0) const;
};

/// Circular arena bounded by an opaque vertical wall.
struct Arena {
  static constexpr double kDefaultRadius = 9.0;

  double radius = kDefaultRadius;
  std::vector<Obstacle> obstacles;

  /// Throws std::invalid_argument if radius <= 0 or any pillar pokes outside the circle.
  void validate() const;
  bool inside(const Vec3& p) const { return p.norm_xy() < radius; }
};

struct LidarConfig {
  double r_max = 10.0;
  int azimuth_samples = 360;
  double horizontal_fov_deg = 360.0;
  double vertical_fov_min_deg = -10.0;
  double vertical_fov_max_deg = 20.0;
  /// One return per listed elevation; defaults to the six 5-degree row centres of the PSTO grid.
  std::vector<double> elevations_deg{-7.5, -2.5, 2.5, 7.5, 12.5, 17.5};
  double range_noise_sigma = 0.0;

  void validate() const;
};

struct PointCloud {
  std::vector<Vec3> points;  ///< body frame of the observing agent
};

/// Simulated 360-degree scan. Pillars and the wall are infinite in z, agents are transparent.
/// Throws std::invalid_argument if the pose is outside the arena.
PointCloud raycast_lidar(const AgentPose& pose, const Arena& arena, const LidarConfig& cfg,
                         std::uint64_t noise_seed = 0);

/// Horizontal distance along a world-frame ray (origin, unit direction) to the first solid
/// surface, or nullopt when nothing is hit within max_range.
std::optional<double> cast_ray_xy(const Vec3& origin, const Vec3& dir, const Arena& arena,
                                  double max_range);

/// Clearance to the nearest pillar or the wall; 0 inside a solid.
double distance_to_nearest_obstacle(const Vec3& p, const Arena& arena);

/// True iff segment a->b crosses no pillar footprint.
bool line_of_sight(const Vec3& a, const Vec3& b, const Arena& arena);

Arena load_arena(const std::filesystem::path& path);
Arena arena_from_json_text(const std::string& text);
std::string arena_to_json_text(const Arena& arena);

}  // namespace pesim
