#ifndef UAVNAV_WORLD_HPP
#define UAVNAV_WORLD_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "uavnav/errors.hpp"
#include "uavnav/geometry.hpp"
#include "uavnav/vehicle.hpp"

namespace uavnav {

enum class ObstacleKind { kCylinder, kBox };

struct Obstacle {
  ObstacleKind kind = ObstacleKind::kCylinder;
  Vec2 center;
  double radius = 0.0;  // cylinder only
  Vec2 half_extents;    // box only
  double yaw = 0.0;     // box only

  static Obstacle cylinder(Vec2 center, double radius) {
    return {ObstacleKind::kCylinder, center, radius, {}, 0.0};
  }
  static Obstacle box(Vec2 center, Vec2 half_extents, double yaw = 0.0) {
    return {ObstacleKind::kBox, center, 0.0, half_extents, yaw};
  }

  /// Corners of the (uninflated) box footprint, counterclockwise.
  std::array<Vec2, 4> box_corners() const {
    const Vec2 h = half_extents;
    return {center + rotate({-h.x, -h.y}, yaw), center + rotate({h.x, -h.y}, yaw),
            center + rotate({h.x, h.y}, yaw), center + rotate({-h.x, h.y}, yaw)};
  }

  /// Axis-aligned bounds of the footprint.
  Rect bounds() const {
    if (kind == ObstacleKind::kCylinder)
      return {{center.x - radius, center.y - radius}, {center.x + radius, center.y + radius}};
    Rect r{{INFINITY, INFINITY}, {-INFINITY, -INFINITY}};
    for (Vec2 p : box_corners()) {
      r.min = {std::min(r.min.x, p.x), std::min(r.min.y, p.y)};
      r.max = {std::max(r.max.x, p.x), std::max(r.max.y, p.y)};
    }
    return r;
  }

  friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

/// Pinhole-free angular camera: rays at cell centers spanning the two fields of view.
struct CameraConfig {
  double h_fov_deg = 90.0;
  double v_fov_deg = 60.0;
  int rows = 9;
  int cols = 12;
  double max_range = 10.0;
  friend bool operator==(const CameraConfig&, const CameraConfig&) = default;
};

struct WorldConfig {
  Rect arena{{0.0, -20.0}, {40.0, 20.0}};
  std::vector<Obstacle> obstacles;
  Rect start_region{{2.0, -8.0}, {6.0, 8.0}};
  Rect goal_region{{34.0, -8.0}, {38.0, 8.0}};
  double goal_radius = 0.5;
  double vehicle_radius = 0.3;
  double altitude = 2.0;  // informational
  CameraConfig camera;

  double diagonal() const { return distance(arena.min, arena.max); }
  friend bool operator==(const WorldConfig&, const WorldConfig&) = default;
};

/// Distance from `p` to the obstacle footprint, 0 inside.
inline double obstacle_distance(Vec2 p, const Obstacle& o) {
  if (o.kind == ObstacleKind::kCylinder) return std::max(distance(p, o.center) - o.radius, 0.0);
  const Vec2 q = rotate(p - o.center, -o.yaw);
  const double dx = std::max(std::abs(q.x) - o.half_extents.x, 0.0);
  const double dy = std::max(std::abs(q.y) - o.half_extents.y, 0.0);
  return std::hypot(dx, dy);
}

/// True iff `p` lies in the footprint grown by `inflation` (boundary included).
inline bool point_in_obstacle(Vec2 p, const Obstacle& o, double inflation) {
  if (o.kind == ObstacleKind::kCylinder) return distance(p, o.center) <= o.radius + inflation;
  return obstacle_distance(p, o) <= inflation;
}

/// Signed distance from `p` to the nearest arena wall; negative outside the arena.
inline double wall_clearance(Vec2 p, const Rect& arena) {
  return std::min({p.x - arena.min.x, arena.max.x - p.x, p.y - arena.min.y, arena.max.y - p.y});
}

/// Vehicle disc centered at `p` touches an obstacle or a wall.
inline bool collision(Vec2 p, const WorldConfig& w) {
  if (wall_clearance(p, w.arena) <= w.vehicle_radius) return true;
  return std::any_of(w.obstacles.begin(), w.obstacles.end(),
                     [&](const Obstacle& o) { return point_in_obstacle(p, o, w.vehicle_radius); });
}

namespace detail {

inline double ray_circle(Vec2 origin, Vec2 dir, Vec2 center, double radius) {
  const Vec2 oc = origin - center;
  const double c = dot(oc, oc) - radius * radius;
  if (c <= 0.0) return 0.0;
  const double b = dot(oc, dir);
  if (b >= 0.0) return INFINITY;  // outside and pointing away
  const double disc = b * b - c;
  if (disc < 0.0) return INFINITY;
  // Near root via the product of roots, avoids cancellation in -b - sqrt(disc).
  return c / (-b + std::sqrt(disc));
}

inline double ray_box(Vec2 origin, Vec2 dir, const Obstacle& o) {
  const Vec2 q = rotate(origin - o.center, -o.yaw);
  const Vec2 d = rotate(dir, -o.yaw);
  const double h[2] = {o.half_extents.x, o.half_extents.y};
  const double qs[2] = {q.x, q.y};
  const double ds[2] = {d.x, d.y};
  if (std::abs(q.x) <= h[0] && std::abs(q.y) <= h[1]) return 0.0;
  double t_enter = -INFINITY, t_exit = INFINITY;
  for (int i = 0; i < 2; ++i) {
    if (ds[i] == 0.0) {
      if (std::abs(qs[i]) > h[i]) return INFINITY;
      continue;
    }
    double t0 = (-h[i] - qs[i]) / ds[i];
    double t1 = (h[i] - qs[i]) / ds[i];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit || t_exit < 0.0) return INFINITY;
  return std::max(t_enter, 0.0);
}

inline double ray_arena(Vec2 origin, Vec2 dir, const Rect& arena) {
  if (wall_clearance(origin, arena) <= 0.0) return 0.0;
  double t = INFINITY;
  if (dir.x > 0.0) t = std::min(t, (arena.max.x - origin.x) / dir.x);
  if (dir.x < 0.0) t = std::min(t, (arena.min.x - origin.x) / dir.x);
  if (dir.y > 0.0) t = std::min(t, (arena.max.y - origin.y) / dir.y);
  if (dir.y < 0.0) t = std::min(t, (arena.min.y - origin.y) / dir.y);
  return t;
}

}  // namespace detail

/// Distance along a unit ray to the first obstacle or wall, clipped to max_range.
/// A ray starting inside an obstacle or outside the arena has distance 0.
inline double ray_distance(Vec2 origin, Vec2 direction, const WorldConfig& w, double max_range) {
  if (std::abs(norm(direction) - 1.0) > 1e-9)
    throw ContractViolation("ray_distance: direction must be a unit vector");
  if (!(max_range > 0.0)) throw ContractViolation("ray_distance: max_range must be positive");
  double t = detail::ray_arena(origin, direction, w.arena);
  for (const Obstacle& o : w.obstacles) {
    const double hit = o.kind == ObstacleKind::kCylinder
                           ? detail::ray_circle(origin, direction, o.center, o.radius)
                           : detail::ray_box(origin, direction, o);
    t = std::min(t, hit);
  }
  return std::min(t, max_range);
}

/// Row-major rows x cols grid of ranges in meters.
struct DepthImage {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  double at(int r, int c) const {
    return values[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
                  static_cast<std::size_t>(c)];
  }
};

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Azimuth of column `c` relative to the vehicle heading; column 0 is leftmost (positive).
inline double column_azimuth(const CameraConfig& cam, int c) {
  const double fov = deg_to_rad(cam.h_fov_deg);
  return 0.5 * fov - (c + 0.5) * fov / cam.cols;
}

/// Elevation of row `r`; row 0 is the top of the image.
inline double row_elevation(const CameraConfig& cam, int r) {
  const double fov = deg_to_rad(cam.v_fov_deg);
  return 0.5 * fov - (r + 0.5) * fov / cam.rows;
}

/// Planar (2.5-D) depth camera: one planar ray per column, slant-corrected per row.
inline DepthImage render_depth(const VehicleState& s, const WorldConfig& w, const CameraConfig& cam) {
  if (cam.rows <= 0 || cam.cols <= 0) throw ContractViolation("render_depth: empty camera grid");
  DepthImage img{cam.rows, cam.cols, std::vector<double>(static_cast<std::size_t>(cam.rows * cam.cols))};
  std::vector<double> slant(static_cast<std::size_t>(cam.rows));
  for (int r = 0; r < cam.rows; ++r) slant[static_cast<std::size_t>(r)] = std::cos(row_elevation(cam, r));
  for (int c = 0; c < cam.cols; ++c) {
    const double az = s.yaw + column_azimuth(cam, c);
    const double planar = ray_distance(s.position(), {std::cos(az), std::sin(az)}, w, cam.max_range);
    for (int r = 0; r < cam.rows; ++r) {
      img.values[static_cast<std::size_t>(r * cam.cols + c)] =
          std::min(planar / slant[static_cast<std::size_t>(r)], cam.max_range);
    }
  }
  return img;
}

/// Stock 40 x 40 m arena: eight 0.75 m cylinders on a jittered 2 x 4 grid
/// across the middle band. Mirrors worlds/default.cfg.
inline WorldConfig default_world() {
  WorldConfig w;
  for (Vec2 c : {Vec2{15.6, -7.9}, Vec2{16.4, -2.2}, Vec2{15.8, 2.9}, Vec2{16.7, 7.3}, Vec2{23.5, -6.8},
                 Vec2{24.3, -2.9}, Vec2{23.8, 2.1}, Vec2{24.6, 7.8}})
    w.obstacles.push_back(Obstacle::cylinder(c, 0.75));
  return w;
}

/// Checks every WorldConfig invariant; throws ConfigError naming the first violation.
inline void validate(const WorldConfig& w) {
  auto fail = [](const std::string& msg) { throw ConfigError("world: " + msg); };
  if (!(w.arena.min.x < w.arena.max.x && w.arena.min.y < w.arena.max.y))
    fail("arena.min must be < arena.max componentwise");
  if (!(w.goal_radius > 0.0)) fail("goal_radius must be > 0");
  if (!(w.vehicle_radius > 0.0)) fail("vehicle_radius must be > 0");
  const CameraConfig& cam = w.camera;
  if (cam.rows <= 0 || cam.cols <= 0) fail("camera.rows and camera.cols must be positive");
  if (!(cam.max_range > 0.0)) fail("camera.max_range must be > 0");
  if (!(cam.h_fov_deg > 0.0 && cam.h_fov_deg < 360.0)) fail("camera.h_fov_deg must be in (0, 360)");
  if (!(cam.v_fov_deg >= 0.0 && cam.v_fov_deg < 180.0)) fail("camera.v_fov_deg must be in [0, 180)");
  for (std::size_t i = 0; i < w.obstacles.size(); ++i) {
    const Obstacle& o = w.obstacles[i];
    const std::string name = "obstacle[" + std::to_string(i) + "]";
    if (o.kind == ObstacleKind::kCylinder && !(o.radius > 0.0)) fail(name + ".radius must be > 0");
    if (o.kind == ObstacleKind::kBox && !(o.half_extents.x > 0.0 && o.half_extents.y > 0.0))
      fail(name + ".half_extents must be > 0");
    if (!o.bounds().inside(w.arena)) fail(name + " footprint leaves the arena");
  }
}

/// Checks that a sampling rectangle is usable: inside the arena and clear of
/// every obstacle footprint inflated by the vehicle radius.
inline void validate_region(const Rect& region, const WorldConfig& w, const std::string& name) {
  if (!region.valid()) throw ConfigError(name + ": min must be <= max componentwise");
  if (!region.inside(w.arena)) throw ConfigError(name + ": rectangle leaves the arena");
  const auto corners = region.corners();
  for (std::size_t i = 0; i < w.obstacles.size(); ++i) {
    const Obstacle& o = w.obstacles[i];
    double gap;
    if (o.kind == ObstacleKind::kCylinder) {
      const Vec2 nearest{std::clamp(o.center.x, region.min.x, region.max.x),
                         std::clamp(o.center.y, region.min.y, region.max.y)};
      gap = distance(nearest, o.center) - o.radius;
    } else {
      gap = quad_distance(corners, o.box_corners());
    }
    if (gap <= w.vehicle_radius)
      throw ConfigError(name + ": rectangle intersects inflated obstacle[" + std::to_string(i) + "]");
  }
}

}  // namespace uavnav

#endif  // UAVNAV_WORLD_HPP
