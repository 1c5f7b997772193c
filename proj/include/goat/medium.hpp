#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "goat/geometry.hpp"

namespace goat {

/// Distance (m) within which a curve domain edge is treated as reached.
inline constexpr double kDomainSlack = 1e-12;

/// Closed lateral interval [lo, hi] in metres.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

struct ConstantCurve {
  double depth;
};

/// z = slope * x + offset
struct LinearCurve {
  double slope;
  double offset;
};

/// z = center.z + sign * semi_depth * sqrt(1 - ((x - center.x) / semi_lateral)^2)
struct EllipseCurve {
  double semi_lateral;  // a
  double semi_depth;    // b
  Point2 center;
  int sign;  // +1: lower half (bulges downward), -1: upper half
};

/// Natural cubic spline through strictly increasing knots.
class SampledCurve {
 public:
  SampledCurve(std::vector<double> xs, std::vector<double> zs);

  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& zs() const { return zs_; }

  double eval(double x) const;
  double slope(double x) const;
  double curvature(double x) const;

 private:
  std::vector<double> xs_;
  std::vector<double> zs_;
  std::shared_ptr<const void> spline_;  // gsl_spline, immutable after construction
};

/// A C1 medium boundary z = b(x) over a lateral domain.
class BoundaryCurve {
 public:
  enum class Kind { constant, linear, ellipse, sampled };

  static BoundaryCurve constant(double depth, Interval domain);
  static BoundaryCurve linear(double slope, double offset, Interval domain);
  static BoundaryCurve ellipse(double semi_lateral, double semi_depth, Point2 center, int sign,
                               Interval domain);
  /// Domain is the knot range.
  static BoundaryCurve sampled(std::vector<double> xs, std::vector<double> zs);

  Kind kind() const;
  const Interval& domain() const { return domain_; }

  /// b(x). Throws DomainError outside the domain.
  double eval(double x) const;
  /// b'(x). Throws DomainError, or SingularSlopeError on an ellipse at |x - cx| >= a.
  double slope(double x) const;
  /// b''(x), used by the analytic Jacobian.
  double curvature(double x) const;

  /// Same curve moved laterally by dx.
  BoundaryCurve shifted(double dx) const;
  /// Image under z -> axis - z.
  BoundaryCurve mirrored(double axis) const;

  const std::variant<ConstantCurve, LinearCurve, EllipseCurve, SampledCurve>& shape() const {
    return shape_;
  }

 private:
  BoundaryCurve(std::variant<ConstantCurve, LinearCurve, EllipseCurve, SampledCurve> shape,
                Interval domain)
      : shape_(std::move(shape)), domain_(domain) {}

  /// Clamps x lying within kDomainSlack of the domain; throws DomainError beyond.
  double check_domain(double x) const;

  std::variant<ConstantCurve, LinearCurve, EllipseCurve, SampledCurve> shape_;
  Interval domain_;
};

/// Boundary evaluation as free functions, mirroring the curve members.
double boundary_eval(const BoundaryCurve& curve, double x);
double boundary_slope(const BoundaryCurve& curve, double x);

/// Ordered stack of constant-speed layers. Layer i lies between boundary i-1 and
/// boundary i (0-based); boundary i separates layer i from layer i+1.
class Medium {
 public:
  Medium(std::vector<double> speeds, std::vector<BoundaryCurve> boundaries, Interval domain);

  std::size_t layer_count() const { return speeds_.size(); }
  std::size_t boundary_count() const { return boundaries_.size(); }
  double speed(std::size_t layer) const { return speeds_.at(layer); }
  const std::vector<double>& speeds() const { return speeds_; }
  const BoundaryCurve& boundary(std::size_t i) const { return boundaries_.at(i); }
  const std::vector<BoundaryCurve>& boundaries() const { return boundaries_; }
  const Interval& domain() const { return domain_; }
  double max_speed() const { return max_speed_; }
  bool homogeneous() const;

  /// Depth range covered by boundary i over the domain (sampled).
  double boundary_min_depth(std::size_t i) const { return depth_min_.at(i); }
  double boundary_max_depth(std::size_t i) const { return depth_max_.at(i); }
  /// Smallest sampled vertical gap between consecutive boundaries; domain width if N = 2.
  double min_separation() const { return min_separation_; }

  /// Index of the layer containing p. Points on a boundary belong to the layer above.
  std::size_t layer_of(Point2 p) const;

  /// Top `layers` layers of this medium, used for targets above the last boundary.
  Medium truncated(std::size_t layers) const;
  Medium shifted(double dx) const;
  Medium with_scaled_speeds(double factor) const;
  /// Reflect through z -> axis - z; layer order reverses.
  Medium mirrored(double axis) const;

 private:
  std::vector<double> speeds_;
  std::vector<BoundaryCurve> boundaries_;
  Interval domain_;
  double max_speed_ = 0.0;
  std::vector<double> depth_min_;
  std::vector<double> depth_max_;
  double min_separation_ = 0.0;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool valid() const { return violations.empty(); }
};

/// Sample grid size used for depth-ordering checks.
inline constexpr std::size_t kOrderingSamples = 1024;

ValidationReport validate_medium(const Medium& medium);

/// Constructs and validates; throws InvalidMediumError listing every violation.
Medium make_validated_medium(std::vector<double> speeds, std::vector<BoundaryCurve> boundaries,
                             Interval domain);

}  // namespace goat
