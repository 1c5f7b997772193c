#include "goat/raytrace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "goat/errors.hpp"

namespace goat {

namespace {

constexpr double kRootTolerance = 1e-13;  // metres
constexpr double kInf = std::numeric_limits<double>::infinity();

double sin_from_direction(Vec2 d, double tan_alpha) {
  return (d.x + d.z * tan_alpha) / (std::sqrt(1.0 + tan_alpha * tan_alpha) * d.norm());
}

double march_step(const Medium& medium) {
  return std::min(medium.min_separation(), medium.domain().width() / 64.0) / 8.0;
}

// Ray parameter at which x leaves the medium domain.
double lateral_exit(const Medium& medium, Point2 o, Vec2 d) {
  const Interval dom = medium.domain();
  if (d.x > 0.0) return (dom.hi - o.x) / d.x;
  if (d.x < 0.0) return (dom.lo - o.x) / d.x;
  return kInf;
}

// Range of ray parameters over which the ray's depth overlaps [zlo, zhi].
std::pair<double, double> depth_window(Point2 o, Vec2 d, double zlo, double zhi) {
  if (d.z == 0.0) {
    if (o.z >= zlo && o.z <= zhi) return {0.0, kInf};
    return {kInf, kInf};
  }
  double a = (zlo - o.z) / d.z;
  double b = (zhi - o.z) / d.z;
  if (a > b) std::swap(a, b);
  return {std::max(a, 0.0), b};
}

// Bisection on a bracketed sign change followed by secant polishing.
template <class F>
double refine_root(F&& f, double ta, double fa, double tb, double fb) {
  for (int i = 0; i < 200; ++i) {
    const double tm = 0.5 * (ta + tb);
    if (tm <= ta || tm >= tb) break;
    const double fm = f(tm);
    if (fm == 0.0) return tm;
    if ((fm < 0.0) == (fa < 0.0)) {
      ta = tm;
      fa = fm;
    } else {
      tb = tm;
      fb = fm;
    }
    if (std::min(std::abs(fa), std::abs(fb)) <= kRootTolerance * 1e-2) break;
  }
  double best = std::abs(fa) < std::abs(fb) ? ta : tb;
  double fbest = std::min(std::abs(fa), std::abs(fb));
  if (fb != fa) {
    const double ts = tb - fb * (tb - ta) / (fb - fa);
    if (ts > ta && ts < tb) {
      const double fs = std::abs(f(ts));
      if (fs < fbest) {
        best = ts;
        fbest = fs;
      }
    }
  }
  return best;
}

// Whether the segment (origin, origin + t_hit * d] dips back across `curve`.
bool recrosses(const Medium& medium, std::size_t boundary, Point2 o, Vec2 d, double t_hit,
               bool downward) {
  const BoundaryCurve& curve = medium.boundary(boundary);
  if (curve.kind() == BoundaryCurve::Kind::constant || curve.kind() == BoundaryCurve::Kind::linear) {
    return false;
  }
  const double zlo = medium.boundary_min_depth(boundary);
  const double zhi = medium.boundary_max_depth(boundary);
  const double margin = 1e-3 * (zhi - zlo) + 1e-9;
  auto [w0, w1] = depth_window(o, d, zlo - margin, zhi + margin);
  const double t_end = std::min({t_hit, w1, lateral_exit(medium, o, d)});
  const double h = march_step(medium);
  const Interval dom = medium.domain();
  for (double t = std::max(h, w0); t < t_end; t += h) {
    const double x = std::clamp(o.x + t * d.x, dom.lo, dom.hi);
    const double gap = (o.z + t * d.z) - curve.eval(x);
    if (downward ? gap < -kRootTolerance : gap > kRootTolerance) return true;
  }
  return false;
}

}  // namespace

double sin_incidence(Point2 p_prev, Point2 p, double tan_alpha) {
  const Vec2 delta = p - p_prev;
  const double len = delta.norm();
  if (len < kMinSegment) throw DegenerateSegmentError("segment shorter than 1e-12 m");
  return (delta.x + delta.z * tan_alpha) / (std::sqrt(1.0 + tan_alpha * tan_alpha) * len);
}

double refract(double sin_theta_in, double c_in, double c_out) {
  const double s = (c_out / c_in) * sin_theta_in;
  if (std::abs(s) > 1.0 - kGrazingMargin) {
    throw TotalReflectionError("total reflection: |(c_out/c_in) sin(theta)| = " +
                                   std::to_string(std::abs(s)),
                               std::nullopt, std::abs(s));
  }
  return s;
}

Vec2 next_direction(double tan_alpha, double sin_theta_out, bool downward) {
  const double w = std::sqrt(1.0 + tan_alpha * tan_alpha);
  const Vec2 tangent{1.0 / w, tan_alpha / w};
  const Vec2 normal = downward ? Vec2{-tan_alpha / w, 1.0 / w} : Vec2{tan_alpha / w, -1.0 / w};
  const double cos_out = std::sqrt(std::max(0.0, 1.0 - sin_theta_out * sin_theta_out));
  return normalized(sin_theta_out * tangent + cos_out * normal);
}

Intersection intersect_next(const RaySegmentState& state, const Medium& medium, double z_stop) {
  const Point2 o = state.origin;
  const Vec2 d = state.direction;
  const std::size_t nb = medium.boundary_count();
  const bool toward_line = state.downward ? state.layer >= nb : state.layer == 0;

  Intersection hit;
  if (toward_line) {
    if (d.z == 0.0 || (z_stop - o.z) / d.z < 0.0) {
      throw NoIntersectionError("ray does not reach the terminal line", state.layer);
    }
    const double t = (z_stop - o.z) / d.z;
    hit.point = {o.x + t * d.x, z_stop};
    hit.ray_parameter = t;
    hit.boundary = nb;
  } else {
    const std::size_t target = state.downward ? state.layer : state.layer - 1;
    const BoundaryCurve& curve = medium.boundary(target);
    const Interval dom = medium.domain();
    const double t_exit = lateral_exit(medium, o, d);
    double t = -1.0;

    if (const auto* c = std::get_if<ConstantCurve>(&curve.shape())) {
      if (d.z != 0.0) t = (c->depth - o.z) / d.z;
    } else if (const auto* l = std::get_if<LinearCurve>(&curve.shape())) {
      const double den = d.z - l->slope * d.x;
      if (den != 0.0) t = (l->slope * o.x + l->offset - o.z) / den;
    } else {
      auto f = [&](double tt) {
        const double x = std::clamp(o.x + tt * d.x, dom.lo, dom.hi);
        return (o.z + tt * d.z) - curve.eval(x);
      };
      const double zlo = medium.boundary_min_depth(target);
      const double zhi = medium.boundary_max_depth(target);
      const double margin = 1e-3 * (zhi - zlo) + 1e-9;
      auto [w0, w1] = depth_window(o, d, zlo - margin, zhi + margin);
      const double t_end = std::min(t_exit, w1);
      if (std::isfinite(t_end) && w0 <= t_end) {
        const double h = march_step(medium);
        double ta = w0;
        double fa = f(ta);
        if (fa == 0.0) {
          t = ta;
        } else {
          while (ta < t_end) {
            const double tb = std::min(ta + h, t_end);
            const double fb = f(tb);
            if (fb == 0.0) {
              t = tb;
              break;
            }
            if ((fb < 0.0) != (fa < 0.0)) {
              t = refine_root(f, ta, fa, tb, fb);
              break;
            }
            ta = tb;
            fa = fb;
          }
        }
      }
    }

    if (!(t >= 0.0) || t > t_exit * (1.0 + 1e-14) + 1e-15) {
      throw NoIntersectionError(
          "ray leaves the lateral domain before crossing boundary " + std::to_string(target),
          state.layer);
    }
    hit.point = {o.x + t * d.x, o.z + t * d.z};
    if (!dom.contains(hit.point.x)) {
      // Crossings exactly at the domain edge are not extrapolated.
      throw NoIntersectionError("crossing of boundary " + std::to_string(target) +
                                    " lies outside the lateral domain",
                                state.layer);
    }
    hit.point.z = curve.eval(hit.point.x);
    hit.ray_parameter = t;
    hit.boundary = target;
  }

  // Re-crossing of the boundary the ray started on.
  std::optional<std::size_t> previous;
  if (state.downward && state.layer >= 1) previous = state.layer - 1;
  if (!state.downward && state.layer < nb) previous = state.layer;
  if (previous && recrosses(medium, *previous, o, d, hit.ray_parameter, state.downward)) {
    hit.multiple_intersection = true;
  }
  return hit;
}

namespace {

void continue_trace(const Medium& medium, RaySegmentState state, double z_stop, RayPath& path) {
  const std::size_t nb = medium.boundary_count();
  for (;;) {
    const Intersection hit = intersect_next(state, medium, z_stop);
    path.points.push_back(hit.point);
    path.tof_per_layer.push_back(distance(state.origin, hit.point) / medium.speed(state.layer));
    path.multiple_intersection = path.multiple_intersection || hit.multiple_intersection;
    if (hit.boundary == nb) break;

    const std::size_t b = hit.boundary;
    const double s = medium.boundary(b).slope(hit.point.x);
    const double sin_in = sin_from_direction(state.direction, s);
    const std::size_t next_layer = state.downward ? state.layer + 1 : state.layer - 1;
    double sin_out = 0.0;
    try {
      sin_out = refract(sin_in, medium.speed(state.layer), medium.speed(next_layer));
    } catch (const TotalReflectionError& e) {
      throw TotalReflectionError(
          "total reflection at boundary " + std::to_string(b) + ": |(c_out/c_in) sin(theta)| = " +
              std::to_string(e.sine_ratio()),
          b, e.sine_ratio());
    }
    path.incidence_angles.push_back(std::asin(std::clamp(sin_in, -1.0, 1.0)));
    path.refraction_angles.push_back(std::asin(sin_out));
    path.tangent_angles.push_back(std::atan(s));
    state = {hit.point, next_direction(s, sin_out, state.downward), next_layer, state.downward};
  }
  path.tof_total = 0.0;
  for (double t : path.tof_per_layer) path.tof_total += t;
}

}  // namespace

RayPath trace_ray(const Medium& medium, const RaySegmentState& start, double z_stop) {
  RayPath path;
  path.points.push_back(start.origin);
  continue_trace(medium, start, z_stop, path);
  return path;
}

RayPath propagate(const Medium& medium, Point2 p0, double x1, double z_stop) {
  const BoundaryCurve& first = medium.boundary(0);
  const Point2 p1{x1, first.eval(x1)};
  if (!(p1.z > p0.z)) throw DegenerateSegmentError("first crossing must lie below the source");
  const double len = distance(p0, p1);
  if (len < kMinSegment) throw DegenerateSegmentError("source lies on the first boundary");

  RayPath path;
  path.points = {p0, p1};
  path.tof_per_layer.push_back(len / medium.speed(0));

  const Vec2 d_in = normalized(p1 - p0);
  const double s = first.slope(x1);
  const double sin_in = sin_from_direction(d_in, s);
  double sin_out = 0.0;
  try {
    sin_out = refract(sin_in, medium.speed(0), medium.speed(1));
  } catch (const TotalReflectionError& e) {
    throw TotalReflectionError("total reflection at boundary 0: |(c_out/c_in) sin(theta)| = " +
                                   std::to_string(e.sine_ratio()),
                               std::size_t{0}, e.sine_ratio());
  }
  path.incidence_angles.push_back(std::asin(std::clamp(sin_in, -1.0, 1.0)));
  path.refraction_angles.push_back(std::asin(sin_out));
  path.tangent_angles.push_back(std::atan(s));
  continue_trace(medium, {p1, next_direction(s, sin_out, true), 1, true}, z_stop, path);
  return path;
}

}  // namespace goat
