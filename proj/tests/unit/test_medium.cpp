#include <cmath>
#include <random>

#include "doctest.h"
#include "generators.hpp"
#include "goat/errors.hpp"
#include "goat/medium.hpp"

using namespace goat;
using goat::testing::mm;

TEST_SUITE("medium") {

TEST_CASE("boundary_eval examples") {
  const Interval dom{-40 * mm, 40 * mm};
  CHECK(boundary_eval(BoundaryCurve::constant(30 * mm, dom), 7 * mm) == 30 * mm);
  CHECK(boundary_eval(BoundaryCurve::ellipse(70 * mm, 50 * mm, {0, 0}, 1, dom), 0.0) ==
        doctest::Approx(50 * mm).epsilon(1e-15));
  CHECK(boundary_eval(BoundaryCurve::linear(0.5, 10 * mm, dom), 20 * mm) ==
        doctest::Approx(20 * mm).epsilon(1e-15));
}

TEST_CASE("boundary_eval rejects points outside the domain") {
  const auto c = BoundaryCurve::constant(30 * mm, {0, 10 * mm});
  CHECK_THROWS_AS(c.eval(-1 * mm), DomainError);
  CHECK_THROWS_AS(c.slope(11 * mm), DomainError);
}

TEST_CASE("boundary_slope examples") {
  const Interval dom{-40 * mm, 40 * mm};
  CHECK(boundary_slope(BoundaryCurve::ellipse(70 * mm, 50 * mm, {0, 0}, 1, dom), 0.0) == 0.0);
  CHECK(boundary_slope(BoundaryCurve::linear(0.5, 10 * mm, dom), -13 * mm) == 0.5);
  CHECK(boundary_slope(BoundaryCurve::linear(0.5, 10 * mm, dom), 37 * mm) == 0.5);
}

TEST_CASE("ellipse slope is singular at the lateral extent") {
  const auto e = BoundaryCurve::ellipse(10 * mm, 5 * mm, {0, 0}, 1, {-10 * mm, 10 * mm});
  CHECK_THROWS_AS(e.slope(10 * mm), SingularSlopeError);
}

TEST_CASE("sampled slope matches central differences") {
  std::vector<double> xs;
  std::vector<double> zs;
  for (int i = 0; i <= 80; ++i) {
    xs.push_back(i * 0.5 * mm);
    zs.push_back(30 * mm + 2 * mm * std::sin(xs.back() / (3 * mm)));
  }
  const auto c = BoundaryCurve::sampled(xs, zs);
  std::mt19937_64 rng(11);
  const double h = 1e-6 * c.domain().width();
  for (int i = 0; i < 100; ++i) {
    const double x = goat::testing::uniform(rng, c.domain().lo + h, c.domain().hi - h);
    const double fd = (c.eval(x + h) - c.eval(x - h)) / (2 * h);
    CHECK(std::abs(c.slope(x) - fd) <= 1e-6 * std::max(std::abs(fd), 1e-3));
  }
}

TEST_CASE("slope matches central differences for every curve kind") {
  std::mt19937_64 rng(12);
  const Interval dom{0, 40 * mm};
  for (int kind = 0; kind < 4; ++kind) {
    const BoundaryCurve c = goat::testing::random_boundary(rng, dom, 25 * mm, 2 * mm, kind);
    const double h = 1e-6 * dom.width();
    for (int i = 0; i < 100; ++i) {
      const double x = goat::testing::uniform(rng, dom.lo + h, dom.hi - h);
      const double fd = (c.eval(x + h) - c.eval(x - h)) / (2 * h);
      // Near-zero slopes are compared absolutely at the same relative scale.
      CHECK(std::abs(c.slope(x) - fd) <= 1e-6 * std::max(std::abs(fd), 1e-2));
    }
  }
}

TEST_CASE("sampled interpolant reproduces knots and is C1 at knots") {
  std::mt19937_64 rng(13);
  std::vector<double> xs{0.0};
  std::vector<double> zs{20 * mm};
  for (int i = 1; i < 40; ++i) {
    xs.push_back(xs.back() + goat::testing::uniform(rng, 0.5, 1.5) * mm);
    zs.push_back(20 * mm + goat::testing::uniform(rng, -1.0, 1.0) * mm);
  }
  const auto c = BoundaryCurve::sampled(xs, zs);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(c.eval(xs[i]) == doctest::Approx(zs[i]).epsilon(1e-15));
  for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
    const double left = c.slope(std::nextafter(xs[i], xs[i - 1]));
    const double right = c.slope(std::nextafter(xs[i], xs[i + 1]));
    CHECK(std::abs(left - right) <= 1e-10);
  }
}

TEST_CASE("ellipse points satisfy the implicit equation") {
  std::mt19937_64 rng(14);
  const Point2 center{5 * mm, -20 * mm};
  const double a = 70 * mm;
  const double b = 50 * mm;
  for (int sign : {1, -1}) {
    const auto e = BoundaryCurve::ellipse(a, b, center, sign, {-30 * mm, 40 * mm});
    for (int i = 0; i < 200; ++i) {
      const double x = goat::testing::uniform(rng, -30 * mm, 40 * mm);
      const double u = (x - center.x) / a;
      const double v = (e.eval(x) - center.z) / b;
      CHECK(std::abs(u * u + v * v - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("validate_medium examples") {
  const Interval dom{0, 36.45 * mm};
  const Medium ok({1480, 1540}, {BoundaryCurve::constant(30 * mm, dom)}, dom);
  CHECK(validate_medium(ok).valid());

  const Medium inverted({1480, 1540, 1600},
                        {BoundaryCurve::constant(30 * mm, dom), BoundaryCurve::constant(20 * mm, dom)},
                        dom);
  const auto r1 = validate_medium(inverted);
  REQUIRE_FALSE(r1.valid());
  CHECK(r1.violations.front().find("ordering") != std::string::npos);

  const Medium wide({1480, 1540}, {BoundaryCurve::ellipse(10 * mm, 5 * mm, {0, 30 * mm}, 1, dom)},
                    dom);
  const auto r2 = validate_medium(wide);
  REQUIRE_FALSE(r2.valid());
  CHECK(r2.violations.front().find("domain violation") != std::string::npos);
}

TEST_CASE("validation rejects speeds and boundaries at the array plane") {
  const Interval dom{0, 10 * mm};
  CHECK_FALSE(validate_medium(Medium({1480, -1}, {BoundaryCurve::constant(5 * mm, dom)}, dom)).valid());
  CHECK_FALSE(validate_medium(Medium({1480, 1540}, {BoundaryCurve::linear(1.0, -1 * mm, dom)}, dom)).valid());
  CHECK_THROWS_AS(make_validated_medium({1480, 1540}, {BoundaryCurve::constant(0.0, dom)}, dom),
                  InvalidMediumError);
  CHECK_THROWS_AS(Medium({1480}, {}, dom), InvalidMediumError);
  CHECK_THROWS_AS(BoundaryCurve::sampled({0, 1}, {1, 1}), InvalidMediumError);
  CHECK_THROWS_AS(BoundaryCurve::sampled({0, 2, 1}, {1, 1, 1}), InvalidMediumError);
}

TEST_CASE("layer_of and truncation") {
  const Interval dom{0, 40 * mm};
  const Medium m({1540, 2200, 1540},
                 {BoundaryCurve::constant(10 * mm, dom), BoundaryCurve::constant(11 * mm, dom)}, dom);
  CHECK(m.layer_of({5 * mm, 5 * mm}) == 0);
  CHECK(m.layer_of({5 * mm, 10 * mm}) == 0);
  CHECK(m.layer_of({5 * mm, 10.5 * mm}) == 1);
  CHECK(m.layer_of({5 * mm, 30 * mm}) == 2);
  CHECK(m.truncated(2).layer_count() == 2);
  CHECK_THROWS(m.truncated(1));
  CHECK(m.min_separation() == doctest::Approx(1 * mm));
}

TEST_CASE("mirroring reverses layer order") {
  const Interval dom{0, 40 * mm};
  const Medium m({1480, 1540}, {BoundaryCurve::linear(0.1, 20 * mm, dom)}, dom);
  const Medium r = m.mirrored(100 * mm);
  CHECK(r.speed(0) == 1540);
  CHECK(r.boundary(0).eval(10 * mm) == doctest::Approx(100 * mm - 21 * mm).epsilon(1e-15));
  CHECK(r.boundary(0).slope(10 * mm) == doctest::Approx(-0.1));
}

}  // TEST_SUITE
