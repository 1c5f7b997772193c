#pragma once

#include <cmath>

namespace goat {

/// Displacement in the imaging plane (x lateral, z depth; metres).
struct Vec2 {
  double x = 0.0;
  double z = 0.0;

  double norm() const { return std::hypot(x, z); }
};

/// Position in the imaging plane. Depth z increases downward.
struct Point2 {
  double x = 0.0;
  double z = 0.0;

  bool finite() const { return std::isfinite(x) && std::isfinite(z); }
};

inline Vec2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.z - b.z}; }
inline Point2 operator+(Point2 p, Vec2 v) { return {p.x + v.x, p.z + v.z}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.z + b.z}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.z}; }
inline Vec2 operator-(Vec2 v) { return {-v.x, -v.z}; }
inline bool operator==(Point2 a, Point2 b) { return a.x == b.x && a.z == b.z; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.z * b.z; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.z - a.z * b.x; }
inline double distance(Point2 a, Point2 b) { return (b - a).norm(); }

inline Vec2 normalized(Vec2 v) {
  const double n = v.norm();
  return {v.x / n, v.z / n};
}

}  // namespace goat
