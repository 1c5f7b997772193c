#pragma once

#include <cstddef>
#include <vector>

#include "goat/geometry.hpp"
#include "goat/medium.hpp"

namespace goat {

/// Sines at or beyond 1 - kGrazingMargin are treated as total reflection.
inline constexpr double kGrazingMargin = 1e-12;
/// Segments shorter than this are degenerate.
inline constexpr double kMinSegment = 1e-12;

struct RaySegmentState {
  Point2 origin;
  Vec2 direction;     // unit length
  std::size_t layer;  // 0-based
  bool downward = true;  // travelling toward deeper layers
};

/// A ray through the medium. `points` holds the start, one crossing per boundary
/// and the terminal point; the angle vectors are indexed by crossing.
struct RayPath {
  std::vector<Point2> points;
  std::vector<double> incidence_angles;   // theta, signed
  std::vector<double> refraction_angles;  // theta', signed
  std::vector<double> tangent_angles;     // alpha = atan(b')
  std::vector<double> tof_per_layer;
  double tof_total = 0.0;
  /// Set when some segment re-crosses the boundary it just left.
  bool multiple_intersection = false;
};

/// Signed sine of the angle between segment p_prev -> p and the boundary normal at p.
double sin_incidence(Point2 p_prev, Point2 p, double tan_alpha);

/// Snell's law: sin(theta') = (c_out / c_in) sin(theta). Throws TotalReflectionError.
double refract(double sin_theta_in, double c_in, double c_out);

/// Unit direction on the transmission side of a boundary with slope tan_alpha whose
/// angle to the normal has sine sin_theta_out. `downward` selects the side z > boundary.
Vec2 next_direction(double tan_alpha, double sin_theta_out, bool downward);

struct Intersection {
  Point2 point;
  double ray_parameter = 0.0;
  bool multiple_intersection = false;
  /// Index of the boundary hit, or boundary_count() for the line z = z_stop.
  std::size_t boundary = 0;
};

/// First crossing of the ray with the next boundary in its direction of travel, or with
/// the horizontal line z = z_stop when no boundary remains in that direction.
Intersection intersect_next(const RaySegmentState& state, const Medium& medium, double z_stop);

/// Traces from `start` until the line z = z_stop, refracting at every boundary.
RayPath trace_ray(const Medium& medium, const RaySegmentState& start, double z_stop);

/// Ray from p0 (in the top layer) through (x1, b_0(x1)) down to z = z_stop.
RayPath propagate(const Medium& medium, Point2 p0, double x1, double z_stop);

}  // namespace goat
