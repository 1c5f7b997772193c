#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "goat/geometry.hpp"
#include "goat/medium.hpp"

namespace goat {

enum class Condition { no_total_reflection, unique_intersection, uniqueness_scan, bracket_exists };

std::string to_string(Condition condition);

struct ConditionReport {
  Condition condition = Condition::no_total_reflection;
  std::size_t boundary_index = 0;
  bool satisfied = true;
  std::optional<Point2> witness;
  std::optional<Interval> witness_interval;
  std::vector<double> witness_xs;
  double margin = 0.0;
  std::string detail;
};

/// One report per boundary crossed by path_points (start, crossings, ...).
/// margin = 1 - |(c_{n+1}/c_n) sin(theta_n)|.
std::vector<ConditionReport> check_no_total_reflection(const Medium& medium,
                                                       const std::vector<Point2>& path_points);

/// Slope dz/dx of the segment a -> b, or nullopt for a vertical segment.
std::optional<double> ray_slope(Point2 a, Point2 b);

/// Whether the ray pn -> p_next (slope k) stays on one side of boundary `boundary_index`
/// between the two crossings. A vertical ray (nullopt) is always satisfied.
ConditionReport check_unique_intersection(const Medium& medium, std::size_t boundary_index,
                                          Point2 pn, Point2 p_next, std::optional<double> slope_k);

/// dToF/dx_n at the crossings xs (s/m).
std::vector<double> tof_gradient(const Medium& medium, Point2 p0, Point2 pN,
                                 const std::vector<double>& xs);

/// b'(x_n) minus the stationarity slope determined by the neighbouring points.
/// Throws DegenerateDenominatorError when the slope is undefined.
double slope_condition_residual(const Medium& medium, std::size_t boundary_index, Point2 p_prev,
                                Point2 p, Point2 p_next);

/// Stationarity slope at p for a two-point path p_prev -> p -> p_next with speeds c_in, c_out.
double stationarity_slope(double c_in, double c_out, Point2 p_prev, Point2 p, Point2 p_next);

/// Counts sign changes of the stationarity condition for x_1 over the domain (two layers only).
ConditionReport uniqueness_scan(const Medium& medium, Point2 p0, Point2 pN,
                                std::size_t samples = 1024);

/// Whether the shooting scan finds a sign change of the terminal offset.
ConditionReport check_bracket(const Medium& medium, Point2 p0, Point2 pN);

struct LevelSetCurve {
  std::vector<Point2> points;  // ascending x
  double tof_value = 0.0;
  Point2 seed;
  bool truncated = false;  // a branch stopped at a degenerate slope or next to p0/p2
};

inline constexpr std::size_t kDefaultArcSteps = 2048;

/// Points P with |P - p0|/c_1 + |P - p2|/c_2 = ToF(seed), traced by integrating the
/// stationarity slope from the seed in both lateral directions.
LevelSetCurve tof_level_set(const Medium& medium2, Point2 p0, Point2 p2, Point2 seed,
                            std::size_t arc_steps = kDefaultArcSteps);

/// |P - p0| + (c_1/c_2)|P - p2| - (same at the seed), per curve point (metres).
std::vector<double> oval_residuals(const Medium& medium2, Point2 p0, Point2 p2,
                                   const LevelSetCurve& curve);

struct OracleResult {
  double tof = 0.0;
  std::vector<double> xs;
  double dp_tof = 0.0;  // before refinement
  double bound = 0.0;   // 0.5 * spacing^2 * curvature estimate
};

/// Minimum-ToF chain of boundary points by dynamic programming over x-grids, refined by
/// cyclic golden-section coordinate descent.
OracleResult fermat_oracle(const Medium& medium, Point2 p0, Point2 pN, std::size_t grid = 4096,
                           std::size_t refine_iters = 60);

}  // namespace goat
