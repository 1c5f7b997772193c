#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "goat/medium.hpp"
#include "goat/scenario.hpp"

namespace goat::testing {

inline std::string fixture_path(const std::string& name) {
  return std::string(GOAT_SCENARIO_DIR) + "/" + name + ".json";
}

inline Scenario fixture(const std::string& name) { return load_scenario(fixture_path(name)); }

inline constexpr double mm = 1e-3;

/// A medium with a source above the first boundary and a focus below the last one.
struct Case {
  Medium medium;
  Point2 source;
  Point2 focus;
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  // 53 random bits; unlike std::uniform_real_distribution this is identical on every platform.
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Gentle boundary around `depth` with lateral structure bounded by `amplitude`.
inline BoundaryCurve random_boundary(std::mt19937_64& rng, Interval dom, double depth,
                                     double amplitude, int kind) {
  const double mid = 0.5 * (dom.lo + dom.hi);
  switch (kind) {
    case 0:
      return BoundaryCurve::constant(depth, dom);
    case 1: {
      const double k = uniform(rng, -1.0, 1.0) * amplitude / (0.5 * dom.width());
      return BoundaryCurve::linear(k, depth - k * mid, dom);
    }
    case 2: {
      const double a = dom.width() * uniform(rng, 1.2, 2.5);
      const double b = amplitude * uniform(rng, 2.0, 6.0);
      const int sign = rng() % 2 == 0 ? 1 : -1;
      // Choose the centre so the ellipse passes through `depth` at mid-domain.
      return BoundaryCurve::ellipse(a, b, {mid, depth - sign * b}, sign, dom);
    }
    default: {
      const double period = dom.width() * uniform(rng, 0.6, 1.5);
      const double phase = uniform(rng, 0.0, 6.283185307179586);
      const double amp = amplitude * uniform(rng, 0.2, 0.6);
      std::vector<double> xs;
      std::vector<double> zs;
      const int knots = 48;
      for (int i = 0; i <= knots; ++i) {
        const double x = dom.lo + dom.width() * i / knots;
        xs.push_back(x);
        zs.push_back(depth + amp * std::sin(6.283185307179586 * (x - dom.lo) / period + phase));
      }
      return BoundaryCurve::sampled(xs, zs);
    }
  }
}

/// 2 to `max_layers` layers over a 30-50 mm domain, boundaries 6-14 mm apart, speeds
/// 1400-1700 m/s, source and focus inside the central half of the domain.
inline Case random_case(std::mt19937_64& rng, std::size_t min_layers = 2,
                        std::size_t max_layers = 4) {
  for (;;) {
    const double width = uniform(rng, 30.0, 50.0) * mm;
    const Interval dom{0.0, width};
    const std::size_t layers =
        min_layers + static_cast<std::size_t>(rng() % (max_layers - min_layers + 1));
    std::vector<double> speeds;
    for (std::size_t i = 0; i < layers; ++i) speeds.push_back(uniform(rng, 1400.0, 1700.0));
    std::vector<BoundaryCurve> curves;
    double depth = uniform(rng, 12.0, 20.0) * mm;
    for (std::size_t i = 0; i + 1 < layers; ++i) {
      curves.push_back(random_boundary(rng, dom, depth, 1.5 * mm, static_cast<int>(rng() % 4)));
      depth += uniform(rng, 8.0, 14.0) * mm;
    }
    Medium m(speeds, curves, dom);
    if (!validate_medium(m).valid()) continue;
    if (m.min_separation() < 2.0 * mm) continue;
    const double top = m.boundary_min_depth(0);
    const double bottom = m.boundary_max_depth(m.boundary_count() - 1);
    const Point2 source{uniform(rng, 0.25, 0.75) * width, uniform(rng, 0.5, 0.7) * top};
    const Point2 focus{uniform(rng, 0.25, 0.75) * width, bottom + uniform(rng, 5.0, 20.0) * mm};
    return {std::move(m), source, focus};
  }
}

}  // namespace goat::testing
