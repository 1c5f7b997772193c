#include "goat/goatsolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "goat/errors.hpp"

namespace goat {

namespace {

constexpr std::size_t kShootingCandidates = 64;
constexpr double kShootingTolerance = 1e-13;  // metres
constexpr std::size_t kChordSamples = 256;

struct Node {
  double x;
  double z;
  double s;  // b'(x)
  double k;  // b''(x)
};

// Sine of the angle between segment (u, v) and the normal of a boundary with slope s,
// and its partial derivatives.
struct SineTerm {
  double value;
  double du;
  double dv;
  double ds;
};

SineTerm sine_term(double u, double v, double s) {
  const double l2 = u * u + v * v;
  const double l = std::sqrt(l2);
  if (l < kMinSegment) throw DegenerateSegmentError("segment shorter than 1e-12 m");
  const double w = std::sqrt(1.0 + s * s);
  const double wl3 = w * l2 * l;
  return {(u + s * v) / (w * l), v * (v - s * u) / wl3, u * (s * u - v) / wl3,
          (v - s * u) / (w * w * w * l)};
}

std::vector<Node> nodes_of(const Medium& medium, const std::vector<double>& xs, bool curvature) {
  if (xs.size() != medium.boundary_count()) {
    throw std::invalid_argument("expected one crossing per boundary");
  }
  std::vector<Node> nodes(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const BoundaryCurve& b = medium.boundary(i);
    nodes[i] = {xs[i], b.eval(xs[i]), b.slope(xs[i]), curvature ? b.curvature(xs[i]) : 0.0};
  }
  return nodes;
}

Point2 point_of(const Node& n) { return {n.x, n.z}; }

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double a : v) m = std::max(m, std::abs(a));
  return m;
}

bool in_domains(const Medium& medium, const std::vector<double>& xs) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !medium.boundary(i).domain().contains(xs[i])) return false;
  }
  return true;
}

// Each segment must stay inside its own layer.
bool admissible(const Medium& medium, const std::vector<Point2>& points) {
  constexpr int kSamples = 257;  // same 256 interior samples as the unique-intersection check
  const std::size_t nb = medium.boundary_count();
  for (std::size_t layer = 0; layer + 1 < points.size(); ++layer) {
    const Point2 a = points[layer];
    const Point2 b = points[layer + 1];
    for (int j = 1; j < kSamples; ++j) {
      const double t = static_cast<double>(j) / kSamples;
      const Point2 p{a.x + t * (b.x - a.x), a.z + t * (b.z - a.z)};
      if (layer > 0) {
        const BoundaryCurve& above = medium.boundary(layer - 1);
        if (above.domain().contains(p.x) && p.z < above.eval(p.x)) return false;
      }
      if (layer < nb) {
        const BoundaryCurve& below = medium.boundary(layer);
        if (below.domain().contains(p.x) && p.z > below.eval(p.x)) return false;
      }
    }
  }
  return true;
}

struct NewtonOutcome {
  std::vector<double> xs;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::string reason;
};

NewtonOutcome newton_iterate(const Medium& medium, Point2 p0, Point2 pN, std::vector<double> xs,
                             const SolverOptions& opts) {
  NewtonOutcome out;
  std::vector<double> f = residuals(medium, p0, pN, xs);
  double norm = max_abs(f);
  out.xs = xs;
  out.residual = norm;
  for (;;) {
    if (norm <= opts.tol_residual) {
      out.converged = true;
      return out;
    }
    if (out.iterations >= opts.max_newton_iters) {
      out.reason = "iteration limit reached";
      return out;
    }
    std::vector<double> rhs(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) rhs[i] = -f[i];
    const std::vector<double> step = solve_tridiagonal(residual_jacobian(medium, p0, pN, xs), rhs);
    if (!std::all_of(step.begin(), step.end(), [](double d) { return std::isfinite(d); })) {
      out.reason = "singular Jacobian";
      return out;
    }
    double lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt, lambda *= 0.5) {
      std::vector<double> trial(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) trial[i] = xs[i] + lambda * step[i];
      if (!in_domains(medium, trial)) continue;
      std::vector<double> ft;
      try {
        ft = residuals(medium, p0, pN, trial);
      } catch (const DegenerateSegmentError&) {
        continue;
      } catch (const SingularSlopeError&) {
        continue;
      }
      const double nt = max_abs(ft);
      if (nt < norm) {
        xs = std::move(trial);
        f = std::move(ft);
        norm = nt;
        accepted = true;
        break;
      }
    }
    ++out.iterations;
    if (!accepted) {
      out.reason = "line search failed to reduce the residual";
      return out;
    }
    out.xs = xs;
    out.residual = norm;
  }
}

GoatSolution finish(const Medium& medium, Point2 p0, Point2 pN, std::vector<double> xs,
                    int iterations, SolveMethod method) {
  GoatSolution sol;
  sol.path = reconstruct_path(medium, p0, pN, xs);
  sol.tof = sol.path.tof_total;
  sol.residual_norm = max_abs(residuals(medium, p0, pN, xs));
  sol.xs = std::move(xs);
  sol.iterations = iterations;
  sol.method = method;
  return sol;
}

struct ShotRoot {
  std::vector<double> xs;
  double tof;
  bool multiple_intersection;
};

}  // namespace

std::string to_string(SolveMethod method) {
  switch (method) {
    case SolveMethod::newton: return "newton";
    case SolveMethod::shooting: return "shooting";
    case SolveMethod::hybrid: return "hybrid";
    case SolveMethod::direct: return "direct";
  }
  return "unknown";
}

std::vector<double> residuals(const Medium& medium, Point2 p0, Point2 pN,
                              const std::vector<double>& xs) {
  const std::vector<Node> nodes = nodes_of(medium, xs, false);
  const std::size_t n = nodes.size();
  const double cmax = medium.max_speed();
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 prev = i == 0 ? p0 : point_of(nodes[i - 1]);
    const Point2 next = i + 1 == n ? pN : point_of(nodes[i + 1]);
    const Node& c = nodes[i];
    const SineTerm a = sine_term(c.x - prev.x, c.z - prev.z, c.s);
    const SineTerm b = sine_term(next.x - c.x, next.z - c.z, c.s);
    f[i] = (medium.speed(i + 1) * a.value - medium.speed(i) * b.value) / cmax;
  }
  return f;
}

Tridiagonal residual_jacobian(const Medium& medium, Point2 p0, Point2 pN,
                              const std::vector<double>& xs) {
  const std::vector<Node> nodes = nodes_of(medium, xs, true);
  const std::size_t n = nodes.size();
  const double cmax = medium.max_speed();
  Tridiagonal j{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 prev = i == 0 ? p0 : point_of(nodes[i - 1]);
    const Point2 next = i + 1 == n ? pN : point_of(nodes[i + 1]);
    const Node& c = nodes[i];
    const SineTerm a = sine_term(c.x - prev.x, c.z - prev.z, c.s);
    const SineTerm b = sine_term(next.x - c.x, next.z - c.z, c.s);
    const double ci = medium.speed(i);
    const double cn = medium.speed(i + 1);
    const double da = a.du + a.dv * c.s + a.ds * c.k;
    const double db = -b.du - b.dv * c.s + b.ds * c.k;
    j.diag[i] = (cn * da - ci * db) / cmax;
    if (i > 0) j.lower[i] = cn * (-a.du - a.dv * nodes[i - 1].s) / cmax;
    if (i + 1 < n) j.upper[i] = -ci * (b.du + b.dv * nodes[i + 1].s) / cmax;
  }
  return j;
}

std::vector<double> solve_tridiagonal(const Tridiagonal& t, std::vector<double> rhs) {
  const std::size_t n = t.size();
  if (rhs.size() != n) throw std::invalid_argument("tridiagonal size mismatch");
  if (n == 0) return rhs;
  std::vector<double> c(n, 0.0);
  double denom = t.diag[0];
  c[0] = n > 1 ? t.upper[0] / denom : 0.0;
  rhs[0] /= denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = t.diag[i] - t.lower[i] * c[i - 1];
    if (i + 1 < n) c[i] = t.upper[i] / denom;
    rhs[i] = (rhs[i] - t.lower[i] * rhs[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
  return rhs;
}

std::vector<double> initial_guess_straight(const Medium& medium, Point2 p0, Point2 pN) {
  const double dx = pN.x - p0.x;
  const double dz = pN.z - p0.z;
  std::vector<double> xs;
  xs.reserve(medium.boundary_count());
  for (std::size_t i = 0; i < medium.boundary_count(); ++i) {
    const BoundaryCurve& curve = medium.boundary(i);
    const Interval dom = curve.domain();
    double t_lo = 0.0;
    double t_hi = 1.0;
    if (dx != 0.0) {
      double ta = (dom.lo - p0.x) / dx;
      double tb = (dom.hi - p0.x) / dx;
      if (ta > tb) std::swap(ta, tb);
      t_lo = std::max(t_lo, ta);
      t_hi = std::min(t_hi, tb);
    } else if (!dom.contains(p0.x)) {
      t_hi = -1.0;
    }
    const std::string missed = "straight chord misses boundary " + std::to_string(i);
    if (!(t_hi > t_lo)) throw NoIntersectionError(missed, i);

    auto x_at = [&](double t) { return std::clamp(p0.x + t * dx, dom.lo, dom.hi); };
    auto f = [&](double t) { return (p0.z + t * dz) - curve.eval(x_at(t)); };
    double ta = t_lo;
    double fa = f(ta);
    std::optional<std::pair<double, double>> bracket;
    if (fa == 0.0) bracket = {ta, ta};
    for (std::size_t k = 1; k <= kChordSamples && !bracket; ++k) {
      const double tb = t_lo + (t_hi - t_lo) * static_cast<double>(k) / kChordSamples;
      const double fb = f(tb);
      if (fb == 0.0 || (fb > 0.0) != (fa > 0.0)) bracket = {ta, tb};
      ta = tb;
      fa = fb;
    }
    if (!bracket) throw NoIntersectionError(missed, i);
    auto [lo, hi] = *bracket;
    double flo = f(lo);
    const double len = std::hypot(dx, dz);
    while ((hi - lo) * len > 1e-13) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double fm = f(mid);
      if (fm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((fm > 0.0) == (flo > 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    // Newton polish inside the bracket brings the crossing to rounding level.
    double t = 0.5 * (lo + hi);
    double ft = std::abs(f(t));
    for (int k = 0; k < 3 && ft > 0.0; ++k) {
      const double x = x_at(t);
      const double g = dz - curve.slope(x) * dx;
      if (g == 0.0) break;
      const double tn = t - ((p0.z + t * dz) - curve.eval(x)) / g;
      if (!(tn >= lo && tn <= hi)) break;
      const double fn = std::abs(f(tn));
      if (!(fn < ft)) break;
      t = tn;
      ft = fn;
    }
    xs.push_back(x_at(t));
  }
  return xs;
}

GoatSolution solve_newton(const Medium& medium, Point2 p0, Point2 pN, const SolverOptions& opts) {
  return solve_newton(medium, p0, pN, initial_guess_straight(medium, p0, pN), opts);
}

GoatSolution solve_newton(const Medium& medium, Point2 p0, Point2 pN, std::vector<double> start,
                          const SolverOptions& opts) {
  if (!(opts.tol_residual > 0.0)) throw std::invalid_argument("tol_residual must be positive");
  NewtonOutcome out = newton_iterate(medium, p0, pN, std::move(start), opts);
  if (!out.converged) {
    throw NonConvergenceError("Newton did not converge: " + out.reason, out.xs, out.residual);
  }
  GoatSolution sol = finish(medium, p0, pN, std::move(out.xs), out.iterations, SolveMethod::newton);
  if (!admissible(medium, sol.path.points)) {
    throw NonConvergenceError("Newton converged to a path that leaves its layers", sol.xs,
                              sol.residual_norm);
  }
  return sol;
}

ShootingScan shooting_scan(const Medium& medium, Point2 p0, Point2 pN) {
  const Interval dom = medium.boundary(0).domain();
  ShootingScan scan;
  scan.launch_xs.resize(kShootingCandidates);
  scan.offsets.resize(kShootingCandidates);
  scan.failures.resize(kShootingCandidates);
  for (std::size_t k = 0; k < kShootingCandidates; ++k) {
    scan.launch_xs[k] = dom.lo + dom.width() * static_cast<double>(k) / (kShootingCandidates - 1);
    try {
      scan.offsets[k] = propagate(medium, p0, scan.launch_xs[k], pN.z).points.back().x - pN.x;
      ++scan.traced;
    } catch (const TotalReflectionError& e) {
      scan.failures[k] = e.kind();
      ++scan.total_reflections;
    } catch (const Error& e) {
      scan.failures[k] = e.kind();
      ++scan.missed;
    }
  }
  for (std::size_t k = 0; k + 1 < kShootingCandidates; ++k) {
    const auto& fa = scan.offsets[k];
    const auto& fb = scan.offsets[k + 1];
    if (!fa || !fb) continue;
    if (*fa == 0.0 && k > 0) continue;  // counted by the previous bracket
    if (*fa == 0.0 || *fb == 0.0 || (*fa > 0.0) != (*fb > 0.0)) scan.brackets.push_back(k);
  }
  return scan;
}

GoatSolution solve_shooting(const Medium& medium, Point2 p0, Point2 pN,
                            const SolverOptions& opts) {
  const std::size_t nb = medium.boundary_count();
  auto offset = [&](double x1) { return propagate(medium, p0, x1, pN.z).points.back().x - pN.x; };

  const ShootingScan scan = shooting_scan(medium, p0, pN);
  const auto& xc = scan.launch_xs;
  const auto& fc = scan.offsets;

  std::vector<ShotRoot> roots;
  for (std::size_t k : scan.brackets) {
    double a = xc[k];
    double b = xc[k + 1];
    double fa = *fc[k];
    double fb = *fc[k + 1];

    double root = fa == 0.0 ? a : b;
    try {
      if (fa != 0.0 && fb != 0.0) {
        while (std::min(std::abs(fa), std::abs(fb)) > kShootingTolerance) {
          const double m = 0.5 * (a + b);
          if (m <= a || m >= b) break;
          const double fm = offset(m);
          if (fm == 0.0) {
            a = b = m;
            fa = fb = 0.0;
            break;
          }
          if ((fm > 0.0) == (fa > 0.0)) {
            a = m;
            fa = fm;
          } else {
            b = m;
            fb = fm;
          }
        }
        root = std::abs(fa) <= std::abs(fb) ? a : b;
        if (fa != fb) {
          const double x_sec = b - fb * (b - a) / (fb - fa);
          if (x_sec > a && x_sec < b) {
            const double f_sec = offset(x_sec);
            if (std::abs(f_sec) < std::min(std::abs(fa), std::abs(fb))) root = x_sec;
          }
        }
      }
      const RayPath ray = propagate(medium, p0, root, pN.z);
      std::vector<double> xs(nb);
      for (std::size_t i = 0; i < nb; ++i) xs[i] = ray.points[i + 1].x;
      // Newton polish absorbs the residual terminal offset.
      SolverOptions polish = opts;
      polish.max_newton_iters = 4;
      const NewtonOutcome out = newton_iterate(medium, p0, pN, xs, polish);
      if (out.converged) {
        double moved = 0.0;
        for (std::size_t i = 0; i < nb; ++i) moved = std::max(moved, std::abs(out.xs[i] - xs[i]));
        if (moved <= 1e-9) xs = out.xs;
      }
      const double tof = reconstruct_path(medium, p0, pN, xs).tof_total;
      roots.push_back({std::move(xs), tof, ray.multiple_intersection});
    } catch (const Error&) {
      // A ray inside the bracket failed; the bracket is unusable.
    }
  }

  if (roots.empty()) {
    throw NoBracketError("no sign change of the terminal offset over " +
                             std::to_string(kShootingCandidates) + " launch points (" +
                             std::to_string(scan.traced) + " traced, " +
                             std::to_string(scan.total_reflections) + " totally reflected, " +
                             std::to_string(scan.missed) + " missed)",
                         scan.traced, scan.total_reflections, scan.missed);
  }
  // Rays that cross each boundary once win over re-crossing ones, then the smaller ToF.
  std::size_t best = 0;
  for (std::size_t r = 1; r < roots.size(); ++r) {
    const ShotRoot& a = roots[r];
    const ShotRoot& b = roots[best];
    if (a.multiple_intersection != b.multiple_intersection) {
      if (!a.multiple_intersection) best = r;
    } else if (a.tof < b.tof) {
      best = r;
    }
  }
  GoatSolution sol = finish(medium, p0, pN, std::move(roots[best].xs), 0, SolveMethod::shooting);
  sol.multiple_roots = roots.size() > 1;
  sol.path.multiple_intersection = roots[best].multiple_intersection;
  return sol;
}

GoatSolution solve(const Medium& medium, Point2 p0, Point2 pN, const SolverOptions& opts) {
  if (medium.homogeneous()) {
    // Straight rays; the ToF is exactly the HMFA value.
    GoatSolution sol =
        finish(medium, p0, pN, initial_guess_straight(medium, p0, pN), 0, SolveMethod::direct);
    sol.tof = hmfa_tof(p0, pN, medium.speed(0));
    // Every segment has the chord direction, so each Snell residual is exactly zero; the
    // recomputed value only reflects the rounding of the crossing points.
    sol.residual_norm = 0.0;
    return sol;
  }

  std::optional<NonConvergenceError> newton_failure;
  try {
    return solve_newton(medium, p0, pN, opts);
  } catch (const NonConvergenceError& e) {
    newton_failure = e;
  } catch (const DegenerateSegmentError& e) {
    newton_failure = NonConvergenceError(std::string("Newton failed: ") + e.what());
  } catch (const NoIntersectionError& e) {
    newton_failure = NonConvergenceError(std::string("no straight-ray start: ") + e.what());
  } catch (const SingularSlopeError& e) {
    newton_failure = NonConvergenceError(std::string("Newton failed: ") + e.what());
  } catch (const DomainError& e) {
    newton_failure = NonConvergenceError(std::string("Newton failed: ") + e.what());
  }
  if (!opts.bisection_fallback) throw *newton_failure;

  try {
    GoatSolution sol = solve_shooting(medium, p0, pN, opts);
    sol.method = SolveMethod::hybrid;
    return sol;
  } catch (const NoBracketError& e) {
    if (e.total_reflections() > 0) {
      throw TotalReflectionError(
          "no transmitted ray reaches the focus: " + std::to_string(e.total_reflections()) +
          " of " + std::to_string(kShootingCandidates) + " launch points are totally reflected");
    }
    throw NonConvergenceError(std::string(newton_failure->what()) + "; shooting fallback: " +
                                  e.what(),
                              newton_failure->best_xs(), newton_failure->best_residual());
  }
}

double tof_of_path(const Medium& medium, const std::vector<Point2>& points) {
  if (points.size() != medium.layer_count() + 1) {
    throw std::invalid_argument("path needs one point per boundary plus both endpoints");
  }
  double t = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double len = distance(points[i], points[i + 1]);
    if (len < kMinSegment) throw DegenerateSegmentError("segment shorter than 1e-12 m");
    t += len / medium.speed(i);
  }
  return t;
}

double hmfa_tof(Point2 p0, Point2 pN, double c) { return distance(p0, pN) / c; }

RayPath reconstruct_path(const Medium& medium, Point2 p0, Point2 pN,
                         const std::vector<double>& xs) {
  const std::vector<Node> nodes = nodes_of(medium, xs, false);
  RayPath path;
  path.points.reserve(nodes.size() + 2);
  path.points.push_back(p0);
  for (const Node& n : nodes) path.points.push_back(point_of(n));
  path.points.push_back(pN);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Point2 prev = path.points[i];
    const Point2 next = path.points[i + 2];
    const Node& c = nodes[i];
    const double a = sine_term(c.x - prev.x, c.z - prev.z, c.s).value;
    const double b = sine_term(next.x - c.x, next.z - c.z, c.s).value;
    path.incidence_angles.push_back(std::asin(std::clamp(a, -1.0, 1.0)));
    path.refraction_angles.push_back(std::asin(std::clamp(b, -1.0, 1.0)));
    path.tangent_angles.push_back(std::atan(c.s));
  }
  for (std::size_t i = 0; i + 1 < path.points.size(); ++i) {
    const double len = distance(path.points[i], path.points[i + 1]);
    if (len < kMinSegment) throw DegenerateSegmentError("segment shorter than 1e-12 m");
    path.tof_per_layer.push_back(len / medium.speed(i));
  }
  for (double t : path.tof_per_layer) path.tof_total += t;
  return path;
}

double Verification::max() const {
  return std::max({snell, on_boundary, tangent, incidence, refraction});
}

Verification verify_path(const Medium& medium, const RayPath& path) {
  const std::size_t nb = medium.boundary_count();
  if (path.points.size() != nb + 2 || path.incidence_angles.size() != nb ||
      path.refraction_angles.size() != nb || path.tangent_angles.size() != nb) {
    throw std::invalid_argument("path does not match the medium's boundary count");
  }
  Verification v;
  const double cmax = medium.max_speed();
  for (std::size_t i = 0; i < nb; ++i) {
    const Point2 prev = path.points[i];
    const Point2 p = path.points[i + 1];
    const Point2 next = path.points[i + 2];
    const BoundaryCurve& curve = medium.boundary(i);
    const double s = curve.slope(p.x);
    const double sin_t = std::sin(path.incidence_angles[i]);
    const double sin_r = std::sin(path.refraction_angles[i]);
    v.on_boundary = std::max(v.on_boundary, std::abs(p.z - curve.eval(p.x)));
    v.tangent = std::max(v.tangent, std::abs(std::tan(path.tangent_angles[i]) - s));
    v.incidence = std::max(v.incidence, std::abs(sin_t - sin_incidence(prev, p, s)));
    // The transmitted sine is measured on the outgoing segment.
    const Vec2 out = next - p;
    const double len = out.norm();
    if (len < kMinSegment) throw DegenerateSegmentError("segment shorter than 1e-12 m");
    const double geometric = (out.x + out.z * s) / (std::sqrt(1.0 + s * s) * len);
    v.refraction = std::max(v.refraction, std::abs(sin_r - geometric));
    v.snell = std::max(v.snell, std::abs(medium.speed(i + 1) * sin_incidence(prev, p, s) -
                                         medium.speed(i) * geometric) /
                                    cmax);
  }
  return v;
}

TofEngine::TofEngine(Medium medium, SolverOptions opts)
    : medium_(std::move(medium)), opts_(opts) {
  for (std::size_t layers = 2; layers <= medium_.layer_count(); ++layers) {
    prefixes_.push_back(medium_.truncated(layers));
  }
}

GoatSolution TofEngine::solution(Point2 source, Point2 target) const {
  const std::size_t layer = medium_.layer_of(target);
  if (layer == 0) {
    GoatSolution sol;
    sol.path.points = {source, target};
    sol.path.tof_per_layer = {hmfa_tof(source, target, medium_.speed(0))};
    sol.path.tof_total = sol.path.tof_per_layer[0];
    sol.tof = sol.path.tof_total;
    sol.method = SolveMethod::direct;
    return sol;
  }
  return solve(prefixes_[layer - 1], source, target, opts_);
}

double TofEngine::tof(Point2 source, Point2 target) const { return solution(source, target).tof; }

}  // namespace goat
