#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "goat/geometry.hpp"
#include "goat/medium.hpp"
#include "goat/raytrace.hpp"

namespace goat {

struct SolverOptions {
  double tol_residual = 1e-12;
  int max_newton_iters = 25;
  int max_backtracks = 8;
  bool bisection_fallback = true;
};

enum class SolveMethod { newton, shooting, hybrid, direct };

std::string to_string(SolveMethod method);

struct GoatSolution {
  std::vector<double> xs;  // one crossing per boundary
  RayPath path;
  double tof = 0.0;
  int iterations = 0;
  double residual_norm = 0.0;
  SolveMethod method = SolveMethod::newton;
  /// Shooting found more than one root; the minimum-ToF one was kept.
  bool multiple_roots = false;
};

/// Tridiagonal matrix: lower[i] = dF_i/dx_{i-1}, diag[i] = dF_i/dx_i, upper[i] = dF_i/dx_{i+1}.
/// lower[0] and upper[n-1] are zero.
struct Tridiagonal {
  std::vector<double> lower;
  std::vector<double> diag;
  std::vector<double> upper;

  std::size_t size() const { return diag.size(); }
};

/// Snell residuals F_n = (c_{n+1} sin(theta_n) - c_n sin(theta'_n)) / max(c).
std::vector<double> residuals(const Medium& medium, Point2 p0, Point2 pN,
                              const std::vector<double>& xs);

/// Analytic Jacobian of residuals().
Tridiagonal residual_jacobian(const Medium& medium, Point2 p0, Point2 pN,
                              const std::vector<double>& xs);

/// Solves T d = rhs by the Thomas algorithm.
std::vector<double> solve_tridiagonal(const Tridiagonal& t, std::vector<double> rhs);

/// Crossings of the chord p0 -> pN with each boundary.
std::vector<double> initial_guess_straight(const Medium& medium, Point2 p0, Point2 pN);

GoatSolution solve_newton(const Medium& medium, Point2 p0, Point2 pN,
                          const SolverOptions& opts = {});
/// Newton from a given starting iterate.
GoatSolution solve_newton(const Medium& medium, Point2 p0, Point2 pN,
                          std::vector<double> start, const SolverOptions& opts);

/// Terminal offsets x_end - pN.x over equispaced launch points on the first boundary.
struct ShootingScan {
  std::vector<double> launch_xs;
  std::vector<std::optional<double>> offsets;  // absent when the ray failed
  std::vector<std::string> failures;           // error kind per failed launch point
  std::size_t traced = 0;
  std::size_t total_reflections = 0;
  std::size_t missed = 0;
  /// k such that the offset changes sign on [launch_xs[k], launch_xs[k + 1]].
  std::vector<std::size_t> brackets;
};

ShootingScan shooting_scan(const Medium& medium, Point2 p0, Point2 pN);

GoatSolution solve_shooting(const Medium& medium, Point2 p0, Point2 pN,
                            const SolverOptions& opts = {});

/// Newton first, shooting with Newton polish as fallback.
GoatSolution solve(const Medium& medium, Point2 p0, Point2 pN, const SolverOptions& opts = {});

/// Sum over segments of length / layer speed.
double tof_of_path(const Medium& medium, const std::vector<Point2>& points);

double hmfa_tof(Point2 p0, Point2 pN, double c);

/// Full path from the reduced unknowns.
RayPath reconstruct_path(const Medium& medium, Point2 p0, Point2 pN,
                         const std::vector<double>& xs);

/// Largest violation of each equation group, recomputed from the path points alone.
struct Verification {
  double snell = 0.0;       // normalized by max speed
  double on_boundary = 0.0;  // metres
  double tangent = 0.0;      // |tan(alpha) - b'(x)|
  double incidence = 0.0;    // |sin(theta) - geometric sine|
  double refraction = 0.0;   // |sin(theta') - geometric sine|

  double max() const;
};

Verification verify_path(const Medium& medium, const RayPath& path);

/// Point-to-point ToF for sources in the top layer and targets anywhere below them.
/// A target in layer L is solved on the medium truncated to layers 0..L.
class TofEngine {
 public:
  explicit TofEngine(Medium medium, SolverOptions opts = {});

  const Medium& medium() const { return medium_; }
  const SolverOptions& options() const { return opts_; }

  /// Throws the solver's error on failure.
  double tof(Point2 source, Point2 target) const;
  GoatSolution solution(Point2 source, Point2 target) const;

 private:
  Medium medium_;
  SolverOptions opts_;
  std::vector<Medium> prefixes_;  // prefixes_[L - 1] has layers 0..L
};

}  // namespace goat
