#include <cmath>
#include <random>

#include "doctest.h"
#include "generators.hpp"
#include "goat/analysis.hpp"
#include "goat/errors.hpp"
#include "goat/goatsolve.hpp"

using namespace goat;
using goat::testing::mm;

namespace {

Medium flat2(double c1, double c2, double depth = 30 * mm) {
  const Interval dom{-50 * mm, 50 * mm};
  return Medium({c1, c2}, {BoundaryCurve::constant(depth, dom)}, dom);
}

BoundaryCurve sinusoid(double lo, double hi, double depth, double amp, double period) {
  std::vector<double> xs;
  std::vector<double> zs;
  const int n = static_cast<int>(std::round((hi - lo) / (0.05 * mm)));
  for (int i = 0; i <= n; ++i) {
    const double x = i == n ? hi : lo + (hi - lo) * i / n;
    xs.push_back(x);
    zs.push_back(depth + amp * std::sin(2 * M_PI * x / period));
  }
  return BoundaryCurve::sampled(xs, zs);
}

std::vector<Point2> path_points(const Medium& m, Point2 p0, Point2 pN, const std::vector<double>& xs) {
  std::vector<Point2> pts{p0};
  for (std::size_t i = 0; i < xs.size(); ++i) pts.push_back({xs[i], m.boundary(i).eval(xs[i])});
  pts.push_back(pN);
  return pts;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("no-total-reflection examples") {
  const Medium m = flat2(1480, 2200);
  const auto normal = check_no_total_reflection(m, {{0, 0}, {0, 30 * mm}});
  REQUIRE(normal.size() == 1);
  CHECK(normal[0].satisfied);
  CHECK(normal[0].margin == 1.0);

  const auto oblique = check_no_total_reflection(m, {{0, 0}, {30 * mm, 30 * mm}});
  CHECK_FALSE(oblique[0].satisfied);
  CHECK(1.0 - oblique[0].margin == doctest::Approx(2200.0 / 1480.0 * std::sqrt(0.5)).epsilon(1e-14));
  CHECK(1.0 - oblique[0].margin == doctest::Approx(1.0511).epsilon(1e-4));
  REQUIRE(oblique[0].witness.has_value());
  CHECK(oblique[0].witness->x == 30 * mm);
}

TEST_CASE("converged paths satisfy no-total-reflection at every boundary") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 30; ++i) {
    const auto cs = goat::testing::random_case(rng);
    GoatSolution s;
    try {
      s = solve(cs.medium, cs.source, cs.focus);
    } catch (const Error&) {
      continue;
    }
    for (const auto& r : check_no_total_reflection(cs.medium, s.path.points)) CHECK(r.satisfied);
  }
}

TEST_CASE("unique-intersection examples") {
  const Medium m = flat2(1480, 1540);
  CHECK(check_unique_intersection(m, 0, {0, 30 * mm}, {20 * mm, 60 * mm}, 1.5).satisfied);
  CHECK(check_unique_intersection(m, 0, {0, 30 * mm}, {-20 * mm, 60 * mm}, -1.5).satisfied);
  CHECK(check_unique_intersection(m, 0, {0, 30 * mm}, {0, 60 * mm}, std::nullopt).satisfied);
  CHECK_FALSE(ray_slope({0, 0}, {0, 1}).has_value());
  CHECK(*ray_slope({0, 0}, {2, 1}) == 0.5);
}

TEST_CASE("grazing ray over a sinusoidal boundary re-crosses it") {
  const Interval dom{0, 36.5 * mm};
  const BoundaryCurve b = sinusoid(dom.lo, dom.hi, 30 * mm, 2 * mm, 5 * mm);
  const Medium m({1480, 1540}, {b}, dom);
  const Point2 pn{10 * mm, b.eval(10 * mm)};
  const double k = 0.01;
  const Point2 next{20 * mm, pn.z + k * 10 * mm};
  const ConditionReport r = check_unique_intersection(m, 0, pn, next, k);
  CHECK_FALSE(r.satisfied);
  REQUIRE(r.witness.has_value());
  REQUIRE(r.witness_xs.size() == 1);
  const double xw = r.witness_xs[0];
  CHECK(xw > pn.x);
  CHECK(xw < next.x);
  CHECK(r.margin <= 0.0);

  // Independent search: a second root of b(x) - b(xn) - k (x - xn) lies before the witness.
  auto h = [&](double x) { return b.eval(x) - pn.z - k * (x - pn.x); };
  const double start = pn.x + 1e-3 * mm;
  int changes = 0;
  double prev = h(start);
  for (int i = 1; i <= 20000; ++i) {
    const double x = start + (xw - start) * i / 20000.0;
    const double v = h(x);
    if ((v > 0) != (prev > 0) || v == 0.0) ++changes;
    prev = v;
  }
  CHECK(changes >= 1);
}

TEST_CASE("tof_gradient vanishes at converged solutions") {
  const Scenario s3 = goat::testing::fixture("setting3_cover");
  for (const Point2& p0 : s3.sources) {
    for (const Point2& pN : s3.foci) {
      const GoatSolution s = solve(s3.medium, p0, pN);
      for (double g : tof_gradient(s3.medium, p0, pN, s.xs)) CHECK(std::abs(g) <= 1e-9);
    }
  }
}

TEST_CASE("tof_gradient matches central differences of tof_of_path") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 50; ++i) {
    const auto cs = goat::testing::random_case(rng);
    std::vector<double> xs = initial_guess_straight(cs.medium, cs.source, cs.focus);
    for (double& x : xs) x += goat::testing::uniform(rng, -3, 3) * mm;
    const auto g = tof_gradient(cs.medium, cs.source, cs.focus, xs);
    const double h = 1e-7 * cs.medium.domain().width();
    double scale = 0.0;
    for (double v : g) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < xs.size(); ++k) {
      auto plus = xs;
      auto minus = xs;
      plus[k] += h;
      minus[k] -= h;
      const double fd = (tof_of_path(cs.medium, path_points(cs.medium, cs.source, cs.focus, plus)) -
                         tof_of_path(cs.medium, path_points(cs.medium, cs.source, cs.focus, minus))) /
                        (2 * h);
      CHECK(std::abs(g[k] - fd) <= 1e-6 * std::max(std::abs(fd), scale));
    }
  }
}

TEST_CASE("tof_gradient is zero on the chord of a homogeneous medium") {
  const Scenario s = goat::testing::fixture("setting3_cover");
  const Medium h({1540, 1540, 1540}, s.medium.boundaries(), s.medium.domain());
  const Point2 p0 = s.sources[0];
  const Point2 pN = s.foci[1];
  for (double g : tof_gradient(h, p0, pN, initial_guess_straight(h, p0, pN))) {
    CHECK(std::abs(g) <= 1e-15);
  }
}

TEST_CASE("slope condition residual examples") {
  const Scenario s2 = goat::testing::fixture("setting2_ellipse");
  const Point2 p0 = s2.sources[0];
  const Point2 pN = s2.foci[1];
  const GoatSolution s = solve(s2.medium, p0, pN);
  const Point2 p1 = s.path.points[1];
  CHECK(std::abs(slope_condition_residual(s2.medium, 0, p0, p1, pN)) <= 1e-9);
  const double xp = s.xs[0] + 1 * mm;
  CHECK(std::abs(slope_condition_residual(s2.medium, 0, p0, {xp, s2.medium.boundary(0).eval(xp)}, pN)) >
        0.0);

  // Rays along the boundary normal are stationary whatever the speeds.
  const Interval dom{-50 * mm, 50 * mm};
  const Medium tilted({1480, 1900}, {BoundaryCurve::linear(0.3, 30 * mm, dom)}, dom);
  const Point2 p{5 * mm, tilted.boundary(0).eval(5 * mm)};
  const Vec2 n = normalized({-0.3, 1.0});
  CHECK(std::abs(slope_condition_residual(tilted, 0, p + (-20 * mm) * n, p, p + (25 * mm) * n)) <= 1e-12);
  const Medium flat = flat2(1480, 1540);
  CHECK(slope_condition_residual(flat, 0, {0, 0}, {0, 30 * mm}, {0, 60 * mm}) == 0.0);
}

TEST_CASE("slope condition with a vanishing denominator is an error") {
  // Both neighbours level with p: the stationarity denominator is zero.
  const Medium m = flat2(1480, 1540);
  CHECK_THROWS_AS(slope_condition_residual(m, 0, {-10 * mm, 30 * mm}, {0, 30 * mm}, {10 * mm, 30 * mm}),
                  DegenerateDenominatorError);
}

TEST_CASE("uniqueness scan examples") {
  const Medium flat = flat2(1480, 1540);
  const ConditionReport f = uniqueness_scan(flat, {0, 0}, {20 * mm, 60 * mm});
  CHECK(f.satisfied);
  CHECK(f.witness_xs.size() == 1);
  CHECK(std::abs(f.witness_xs[0] - solve(flat, {0, 0}, {20 * mm, 60 * mm}).xs[0]) <= 0.2 * mm);

  const ConditionReport h = uniqueness_scan(flat2(1540, 1540), {0, 0}, {20 * mm, 60 * mm});
  CHECK(h.satisfied);
  REQUIRE(h.witness_xs.size() == 1);
  CHECK(std::abs(h.witness_xs[0] - 10 * mm) <= 0.2 * mm);

  const Scenario osc = goat::testing::fixture("oscillating");
  const ConditionReport o = uniqueness_scan(osc.medium, osc.sources[0], osc.foci[0]);
  CHECK_FALSE(o.satisfied);
  CHECK(o.witness_xs.size() > 1);
  CHECK(o.witness.has_value());

  CHECK_THROWS_AS(uniqueness_scan(goat::testing::fixture("setting3_cover").medium, {0, 0}, {0, 60 * mm}),
                  std::invalid_argument);
}

TEST_CASE("bracket check on solvable and totally reflecting fixtures") {
  const Scenario s1 = goat::testing::fixture("setting1_flat");
  CHECK(check_bracket(s1.medium, s1.sources[0], s1.foci[0]).satisfied);
  const Scenario tr = goat::testing::fixture("total_reflection");
  const ConditionReport r = check_bracket(tr.medium, tr.sources[0], tr.foci[0]);
  CHECK_FALSE(r.satisfied);
  CHECK_FALSE(r.witness_xs.empty());
}

TEST_CASE("level sets are Cartesian ovals of constant ToF") {
  for (const char* name : {"setting1_flat", "setting2_ellipse"}) {
    const Scenario s = goat::testing::fixture(name);
    for (const Point2& p0 : s.sources) {
      const Point2 p2 = s.foci[1];
      const GoatSolution sol = solve(s.medium, p0, p2);
      const Point2 seed = sol.path.points[1];
      const LevelSetCurve c = tof_level_set(s.medium, p0, p2, seed);
      CHECK(c.points.size() > 100);
      for (double r : oval_residuals(s.medium, p0, p2, c)) CHECK(std::abs(r) <= 1e-8);
      for (const Point2& p : c.points) {
        const double t = distance(p, p0) / s.medium.speed(0) + distance(p, p2) / s.medium.speed(1);
        CHECK(std::abs(t - c.tof_value) <= 1e-9 * c.tof_value);
      }
      // The level set through the solution is tangent to the boundary there.
      const double ls = stationarity_slope(s.medium.speed(0), s.medium.speed(1), p0, seed, p2);
      CHECK(std::abs(ls - s.medium.boundary(0).slope(seed.x)) <= 1e-8);
    }
  }
}

TEST_CASE("equal speeds give an ellipse with foci at the endpoints") {
  const Medium m = flat2(1540, 1540);
  const Point2 p0{-5 * mm, 0};
  const Point2 p2{8 * mm, 60 * mm};
  const LevelSetCurve c = tof_level_set(m, p0, p2, {15 * mm, 30 * mm});
  const double d = distance(c.seed, p0) + distance(c.seed, p2);
  CHECK(c.points.size() > 100);
  for (const Point2& p : c.points) CHECK(std::abs(distance(p, p0) + distance(p, p2) - d) <= 1e-8);
}

TEST_CASE("level-set arguments are checked") {
  CHECK_THROWS_AS(tof_level_set(goat::testing::fixture("setting3_cover").medium, {0, 0}, {0, 60 * mm},
                                {0, 30 * mm}),
                  std::invalid_argument);
  CHECK_THROWS_AS(tof_level_set(flat2(1480, 1540), {0, 0}, {0, 60 * mm}, {0, 30 * mm}, 0),
                  std::invalid_argument);
}

TEST_CASE("Fermat oracle examples") {
  const Medium h = flat2(1540, 1540);
  const OracleResult o = fermat_oracle(h, {0, 0}, {20 * mm, 60 * mm});
  const double exact = distance({0, 0}, {20 * mm, 60 * mm}) / 1540;
  CHECK(std::abs(o.tof - exact) <= 1e-10 * exact);
  CHECK(std::abs(o.xs[0] - 10 * mm) <= 1e-6 * mm);

  const Medium m = flat2(1480, 1540);
  const OracleResult r = fermat_oracle(m, {0, 0}, {20 * mm, 60 * mm});
  const double chord = tof_of_path(m, {{0, 0}, {10 * mm, 30 * mm}, {20 * mm, 60 * mm}});
  CHECK(r.tof < chord);
  CHECK(r.tof <= r.dp_tof);
  CHECK_THROWS_AS(fermat_oracle(m, {0, 0}, {0, 60 * mm}, 32), std::invalid_argument);
}

TEST_CASE("Fermat oracle is non-increasing in grid resolution") {
  const Scenario s3 = goat::testing::fixture("setting3_cover");
  const Point2 p0 = s3.sources[2];
  const Point2 pN = s3.foci[1];
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t grid : {256u, 1024u, 4096u}) {
    const double t = fermat_oracle(s3.medium, p0, pN, grid).tof;
    CHECK(t <= prev + 1e-12 * t);
    prev = t;
  }
}

TEST_CASE("Fermat oracle agrees with the solver on the reference geometries") {
  for (const char* name : {"setting1_flat", "setting2_ellipse", "setting3_cover"}) {
    const Scenario s = goat::testing::fixture(name);
    for (const Point2& p0 : s.sources) {
      for (const Point2& pN : s.foci) {
        const double t = solve(s.medium, p0, pN).tof;
        const OracleResult o = fermat_oracle(s.medium, p0, pN);
        CHECK(std::abs(t - o.tof) <= 1e-9 * t);
      }
    }
  }
}

}  // TEST_SUITE
