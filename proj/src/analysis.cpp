#include "goat/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "goat/errors.hpp"
#include "goat/goatsolve.hpp"
#include "goat/raytrace.hpp"

namespace goat {

namespace {

constexpr std::size_t kIntersectionSamples = 256;
constexpr double kDenominatorThreshold = 1e-14;
// Level-set branches stop once the curve turns steeper than this; the fixed-step
// integration in x loses accuracy toward a vertical tangent.
constexpr double kMaxLevelSetSlope = 10.0;
constexpr double kMaxSubsteps = 256.0;
// The slope field is singular at p0 and p2; branches stop this many x-steps short of them.
constexpr double kFocusClearance = 16.0;
constexpr int kGoldenIterations = 80;

struct Stationarity {
  double num;
  double den;  // both normalized by max speed and the two segment lengths
};

Stationarity stationarity_terms(double c_in, double c_out, double cmax, Point2 p_prev, Point2 p,
                                Point2 p_next) {
  const Vec2 d1 = p - p_prev;
  const Vec2 d2 = p_next - p;
  const double l1 = d1.norm();
  const double l2 = d2.norm();
  if (l1 < kMinSegment || l2 < kMinSegment) {
    throw DegenerateSegmentError("segment shorter than 1e-12 m");
  }
  const double scale = cmax * l1 * l2;
  return {(c_in * l1 * d2.x - c_out * l2 * d1.x) / scale,
          (c_out * l2 * d1.z - c_in * l1 * d2.z) / scale};
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

std::string to_string(Condition condition) {
  switch (condition) {
    case Condition::no_total_reflection: return "no_total_reflection";
    case Condition::unique_intersection: return "unique_intersection";
    case Condition::uniqueness_scan: return "uniqueness_scan";
    case Condition::bracket_exists: return "bracket_exists";
  }
  return "unknown";
}

std::vector<ConditionReport> check_no_total_reflection(const Medium& medium,
                                                       const std::vector<Point2>& path_points) {
  const std::size_t nb = medium.boundary_count();
  if (path_points.size() < nb + 1) {
    throw std::invalid_argument("path needs the start point and one crossing per boundary");
  }
  std::vector<ConditionReport> reports;
  for (std::size_t i = 0; i < nb; ++i) {
    const Point2 p = path_points[i + 1];
    const double s = medium.boundary(i).slope(p.x);
    const double value =
        std::abs(medium.speed(i + 1) / medium.speed(i) * sin_incidence(path_points[i], p, s));
    ConditionReport r;
    r.condition = Condition::no_total_reflection;
    r.boundary_index = i;
    r.margin = 1.0 - value;
    r.satisfied = value <= 1.0 - kGrazingMargin;
    if (!r.satisfied) {
      r.witness = p;
      r.detail = "|(c_out/c_in) sin(theta)| = " + std::to_string(value);
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

std::optional<double> ray_slope(Point2 a, Point2 b) {
  if (b.x == a.x) return std::nullopt;
  return (b.z - a.z) / (b.x - a.x);
}

ConditionReport check_unique_intersection(const Medium& medium, std::size_t boundary_index,
                                          Point2 pn, Point2 p_next,
                                          std::optional<double> slope_k) {
  ConditionReport r;
  r.condition = Condition::unique_intersection;
  r.boundary_index = boundary_index;
  if (!slope_k) {
    r.detail = "vertical ray";
    r.margin = 1.0;
    return r;
  }
  const BoundaryCurve& curve = medium.boundary(boundary_index);
  const Interval dom = curve.domain();
  const double lo = std::min(pn.x, p_next.x);
  const double hi = std::max(pn.x, p_next.x);
  const double span = hi - lo;
  if (!(span > 0.0)) {
    r.margin = 1.0;
    return r;
  }
  const double bn = curve.eval(pn.x);
  int reference = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j <= kIntersectionSamples; ++j) {
    const double x = lo + span * static_cast<double>(j) / (kIntersectionSamples + 1);
    if (!dom.contains(x)) continue;
    const double h = curve.eval(x) - bn - *slope_k * (x - pn.x);
    const int sg = sign_of(h);
    if (reference == 0) reference = sg;
    if (sg == 0 || sg != reference) {
      r.satisfied = false;
      r.witness = Point2{x, curve.eval(x)};
      r.witness_xs.push_back(x);
      r.margin = -std::abs(h) / span;
      r.detail = "ray re-crosses boundary " + std::to_string(boundary_index);
      return r;
    }
    min_gap = std::min(min_gap, std::abs(h));
  }
  r.margin = std::isfinite(min_gap) ? min_gap / span : 1.0;
  return r;
}

std::vector<double> tof_gradient(const Medium& medium, Point2 p0, Point2 pN,
                                 const std::vector<double>& xs) {
  const std::size_t nb = medium.boundary_count();
  if (xs.size() != nb) throw std::invalid_argument("expected one crossing per boundary");
  std::vector<Point2> pts{p0};
  for (std::size_t i = 0; i < nb; ++i) pts.push_back({xs[i], medium.boundary(i).eval(xs[i])});
  pts.push_back(pN);
  std::vector<double> g(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const double s = medium.boundary(i).slope(xs[i]);
    const Vec2 d1 = pts[i + 1] - pts[i];
    const Vec2 d2 = pts[i + 2] - pts[i + 1];
    const double l1 = d1.norm();
    const double l2 = d2.norm();
    if (l1 < kMinSegment || l2 < kMinSegment) {
      throw DegenerateSegmentError("segment shorter than 1e-12 m");
    }
    g[i] = (d1.x + s * d1.z) / (medium.speed(i) * l1) -
           (d2.x + s * d2.z) / (medium.speed(i + 1) * l2);
  }
  return g;
}

double stationarity_slope(double c_in, double c_out, Point2 p_prev, Point2 p, Point2 p_next) {
  const Stationarity t =
      stationarity_terms(c_in, c_out, std::max(c_in, c_out), p_prev, p, p_next);
  if (std::abs(t.den) <= kDenominatorThreshold) {
    throw DegenerateDenominatorError("stationarity slope has a vanishing denominator");
  }
  return t.num / t.den;
}

double slope_condition_residual(const Medium& medium, std::size_t boundary_index, Point2 p_prev,
                                Point2 p, Point2 p_next) {
  const double s = medium.boundary(boundary_index).slope(p.x);
  return s - stationarity_slope(medium.speed(boundary_index), medium.speed(boundary_index + 1),
                                p_prev, p, p_next);
}

ConditionReport uniqueness_scan(const Medium& medium, Point2 p0, Point2 pN, std::size_t samples) {
  if (medium.layer_count() != 2) {
    throw std::invalid_argument("uniqueness scan is defined for two-layer media only");
  }
  if (samples < 2) throw std::invalid_argument("uniqueness scan needs at least two samples");
  const BoundaryCurve& curve = medium.boundary(0);
  const Interval dom = curve.domain();
  const double c1 = medium.speed(0);
  const double c2 = medium.speed(1);
  const double cmax = medium.max_speed();

  ConditionReport r;
  r.condition = Condition::uniqueness_scan;
  // The slope condition with its denominator cleared has the sign of dToF/dx_1, so
  // poles of the uncleared form do not register as roots.
  int last = 0;
  double last_x = dom.lo;
  for (std::size_t j = 0; j < samples; ++j) {
    const double x = dom.lo + dom.width() * static_cast<double>(j) / (samples - 1);
    const Point2 p{x, curve.eval(x)};
    double cleared = 0.0;
    try {
      const Stationarity t = stationarity_terms(c1, c2, cmax, p0, p, pN);
      cleared = curve.slope(x) * t.den - t.num;
    } catch (const Error&) {
      continue;
    }
    const int sg = sign_of(cleared);
    if (sg == 0) continue;
    if (last != 0 && sg != last) r.witness_xs.push_back(0.5 * (last_x + x));
    last = sg;
    last_x = x;
  }
  const std::size_t count = r.witness_xs.size();
  r.satisfied = count == 1;
  r.margin = static_cast<double>(count);
  r.detail = "sign changes: " + std::to_string(count);
  if (count > 0) {
    const double x = r.witness_xs.front();
    r.witness = Point2{x, curve.eval(x)};
  } else {
    r.witness_interval = dom;
  }
  return r;
}

ConditionReport check_bracket(const Medium& medium, Point2 p0, Point2 pN) {
  const ShootingScan scan = shooting_scan(medium, p0, pN);
  ConditionReport r;
  r.condition = Condition::bracket_exists;
  r.satisfied = !scan.brackets.empty();
  r.margin = static_cast<double>(scan.traced) / static_cast<double>(scan.launch_xs.size());
  r.detail = std::to_string(scan.traced) + " traced, " + std::to_string(scan.total_reflections) +
             " totally reflected, " + std::to_string(scan.missed) + " missed, " +
             std::to_string(scan.brackets.size()) + " sign changes";
  for (std::size_t k = 0; k < scan.launch_xs.size(); ++k) {
    if (!scan.failures[k].empty()) r.witness_xs.push_back(scan.launch_xs[k]);
  }
  if (r.satisfied) {
    const std::size_t k = scan.brackets.front();
    r.witness_interval = Interval{scan.launch_xs[k], scan.launch_xs[k + 1]};
  } else {
    r.witness_interval = medium.boundary(0).domain();
  }
  return r;
}

LevelSetCurve tof_level_set(const Medium& medium2, Point2 p0, Point2 p2, Point2 seed,
                            std::size_t arc_steps) {
  if (medium2.layer_count() != 2) {
    throw std::invalid_argument("level sets are defined for two-layer media only");
  }
  if (arc_steps == 0) throw std::invalid_argument("arc_steps must be positive");
  const double c1 = medium2.speed(0);
  const double c2 = medium2.speed(1);
  const Interval dom = medium2.domain();
  const double h = dom.width() / static_cast<double>(arc_steps);

  LevelSetCurve curve;
  curve.seed = seed;
  curve.tof_value = distance(seed, p0) / c1 + distance(seed, p2) / c2;

  auto slope = [&](double x, double z) {
    const double s = stationarity_slope(c1, c2, p0, {x, z}, p2);
    if (!std::isfinite(s) || std::abs(s) > kMaxLevelSetSlope) {
      throw DegenerateDenominatorError("level set turns vertical");
    }
    return s;
  };

  auto branch = [&](double dir) {
    std::vector<Point2> pts;
    double x = seed.x;
    double z = seed.z;
    const double step = dir * h;
    for (;;) {
      const double xn = x + step;
      if (!dom.contains(xn)) break;
      // Steep stretches are split into equal RK4 substeps; the count depends only on
      // the slope at the step start, so curves stay reproducible.
      double zn = z;
      try {
        const double s0 = slope(x, z);
        const int sub = 1 + static_cast<int>(std::min(s0 * s0, kMaxSubsteps - 1.0));
        const double hs = step / sub;
        double xs = x;
        for (int j = 0; j < sub; ++j) {
          const double k1 = j == 0 ? s0 : slope(xs, zn);
          const double k2 = slope(xs + 0.5 * hs, zn + 0.5 * hs * k1);
          const double k3 = slope(xs + 0.5 * hs, zn + 0.5 * hs * k2);
          const double xe = j + 1 == sub ? xn : xs + hs;
          const double k4 = slope(xe, zn + hs * k3);
          zn += hs * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
          xs = xe;
        }
      } catch (const Error&) {
        curve.truncated = true;
        break;
      }
      z = zn;
      x = xn;
      const Point2 p{x, z};
      if (distance(p, p0) < kFocusClearance * h || distance(p, p2) < kFocusClearance * h) {
        curve.truncated = true;
        break;
      }
      pts.push_back(p);
    }
    return pts;
  };

  std::vector<Point2> left = branch(-1.0);
  std::vector<Point2> right = branch(1.0);
  curve.points.assign(left.rbegin(), left.rend());
  curve.points.push_back(seed);
  curve.points.insert(curve.points.end(), right.begin(), right.end());
  return curve;
}

std::vector<double> oval_residuals(const Medium& medium2, Point2 p0, Point2 p2,
                                   const LevelSetCurve& curve) {
  const double a = medium2.speed(0) / medium2.speed(1);
  const double target = distance(curve.seed, p0) + a * distance(curve.seed, p2);
  std::vector<double> out;
  out.reserve(curve.points.size());
  for (const Point2& p : curve.points) {
    out.push_back(distance(p, p0) + a * distance(p, p2) - target);
  }
  return out;
}

OracleResult fermat_oracle(const Medium& medium, Point2 p0, Point2 pN, std::size_t grid,
                           std::size_t refine_iters) {
  if (grid < 64) throw std::invalid_argument("oracle grid must have at least 64 points");
  const std::size_t nb = medium.boundary_count();

  std::vector<std::vector<double>> gx(nb, std::vector<double>(grid));
  std::vector<std::vector<double>> gz(nb, std::vector<double>(grid));
  double spacing = 0.0;
  for (std::size_t i = 0; i < nb; ++i) {
    const Interval d = medium.boundary(i).domain();
    spacing = std::max(spacing, d.width() / static_cast<double>(grid - 1));
    for (std::size_t j = 0; j < grid; ++j) {
      gx[i][j] = d.lo + d.width() * static_cast<double>(j) / static_cast<double>(grid - 1);
      gz[i][j] = medium.boundary(i).eval(gx[i][j]);
    }
  }

  auto seg = [](double ax, double az, double bx, double bz) {
    const double dx = bx - ax;
    const double dz = bz - az;
    return std::sqrt(dx * dx + dz * dz);
  };

  // cost[j]: fastest arrival at grid point j of the current boundary.
  std::vector<double> cost(grid);
  for (std::size_t j = 0; j < grid; ++j) {
    cost[j] = seg(p0.x, p0.z, gx[0][j], gz[0][j]) / medium.speed(0);
  }
  std::vector<std::vector<std::uint32_t>> parent(nb, std::vector<std::uint32_t>(grid, 0));
  for (std::size_t i = 1; i < nb; ++i) {
    std::vector<double> next(grid);
    const double c = medium.speed(i);
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, grid),
                      [&](const tbb::blocked_range<std::size_t>& r) {
                        for (std::size_t k = r.begin(); k != r.end(); ++k) {
                          double best = std::numeric_limits<double>::infinity();
                          std::uint32_t arg = 0;
                          for (std::size_t j = 0; j < grid; ++j) {
                            const double t =
                                cost[j] + seg(gx[i - 1][j], gz[i - 1][j], gx[i][k], gz[i][k]) / c;
                            if (t < best) {
                              best = t;
                              arg = static_cast<std::uint32_t>(j);
                            }
                          }
                          next[k] = best;
                          parent[i][k] = arg;
                        }
                      });
    cost.swap(next);
  }
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  const double c_last = medium.speed(nb);
  for (std::size_t j = 0; j < grid; ++j) {
    const double t = cost[j] + seg(gx[nb - 1][j], gz[nb - 1][j], pN.x, pN.z) / c_last;
    if (t < best) {
      best = t;
      arg = j;
    }
  }

  OracleResult res;
  res.dp_tof = best;
  res.xs.assign(nb, 0.0);
  for (std::size_t i = nb; i-- > 0;) {
    res.xs[i] = gx[i][arg];
    arg = parent[i][arg];
  }

  auto total = [&](const std::vector<double>& xs) {
    double t = 0.0;
    Point2 a = p0;
    for (std::size_t i = 0; i < nb; ++i) {
      const Point2 b{xs[i], medium.boundary(i).eval(xs[i])};
      t += seg(a.x, a.z, b.x, b.z) / medium.speed(i);
      a = b;
    }
    return t + seg(a.x, a.z, pN.x, pN.z) / c_last;
  };

  // Cyclic coordinate descent; each coordinate is minimized by golden-section search
  // over a bracket of two grid cells either side of its current value.
  constexpr double kInvPhi = 0.6180339887498949;
  std::vector<double> xs = res.xs;
  double t_best = total(xs);
  for (std::size_t sweep = 0; sweep < refine_iters; ++sweep) {
    for (std::size_t i = 0; i < nb; ++i) {
      const Interval d = medium.boundary(i).domain();
      const double cell = d.width() / static_cast<double>(grid - 1);
      double a = std::max(d.lo, xs[i] - 2.0 * cell);
      double b = std::min(d.hi, xs[i] + 2.0 * cell);
      std::vector<double> trial = xs;
      auto f = [&](double x) {
        trial[i] = x;
        return total(trial);
      };
      double x1 = b - kInvPhi * (b - a);
      double x2 = a + kInvPhi * (b - a);
      double f1 = f(x1);
      double f2 = f(x2);
      for (int it = 0; it < kGoldenIterations; ++it) {
        if (f1 <= f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - kInvPhi * (b - a);
          f1 = f(x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + kInvPhi * (b - a);
          f2 = f(x2);
        }
      }
      const double xm = f1 <= f2 ? x1 : x2;
      const double fm = std::min(f1, f2);
      if (fm < t_best) {
        xs[i] = xm;
        t_best = fm;
      }
    }
  }
  res.xs = xs;
  res.tof = t_best;

  double curvature = 0.0;
  for (std::size_t i = 0; i < nb; ++i) {
    const Interval d = medium.boundary(i).domain();
    if (xs[i] - spacing < d.lo || xs[i] + spacing > d.hi) continue;
    std::vector<double> trial = xs;
    trial[i] = xs[i] + spacing;
    const double tp = total(trial);
    trial[i] = xs[i] - spacing;
    const double tm = total(trial);
    curvature = std::max(curvature, std::abs(tp + tm - 2.0 * t_best) / (spacing * spacing));
  }
  res.bound = 0.5 * spacing * spacing * curvature;
  return res;
}

}  // namespace goat
