#ifndef UAVNAV_GEOMETRY_HPP
#define UAVNAV_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace uavnav {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// Rotates `v` by `angle` radians counterclockwise.
inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double angle) {
  double r = std::remainder(angle, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

/// Closed axis-aligned rectangle; min == max on an axis is allowed (degenerate).
struct Rect {
  Vec2 min;
  Vec2 max;

  bool valid() const { return min.x <= max.x && min.y <= max.y; }
  bool contains(Vec2 p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
  }
  bool inside(const Rect& outer) const { return outer.contains(min) && outer.contains(max); }
  std::array<Vec2, 4> corners() const {
    return {Vec2{min.x, min.y}, Vec2{max.x, min.y}, Vec2{max.x, max.y}, Vec2{min.x, max.y}};
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Distance from `p` to the segment [a, b].
inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  auto on = [](Vec2 p, Vec2 q, Vec2 r, double o) {
    return o == 0.0 && std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
           std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
  };
  return on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4);
}

/// Point inside a convex polygon given in counterclockwise order (boundary counts).
template <std::size_t N>
bool convex_contains(const std::array<Vec2, N>& poly, Vec2 p) {
  for (std::size_t i = 0; i < N; ++i) {
    if (cross(poly[(i + 1) % N] - poly[i], p - poly[i]) < 0.0) return false;
  }
  return true;
}

/// Minimum distance between two convex quadrilaterals (0 when they overlap).
inline double quad_distance(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  for (Vec2 p : a)
    if (convex_contains(b, p)) return 0.0;
  for (Vec2 p : b)
    if (convex_contains(a, p)) return 0.0;
  double best = INFINITY;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (segments_intersect(a[i], a[(i + 1) % 4], b[j], b[(j + 1) % 4])) return 0.0;
      best = std::min(best, point_segment_distance(a[i], b[j], b[(j + 1) % 4]));
      best = std::min(best, point_segment_distance(b[j], a[i], a[(i + 1) % 4]));
    }
  }
  return best;
}

}  // namespace uavnav

#endif  // UAVNAV_GEOMETRY_HPP
