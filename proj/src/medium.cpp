#include "goat/medium.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_spline.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "goat/errors.hpp"

namespace goat {

namespace {

const gsl_spline* as_spline(const std::shared_ptr<const void>& p) {
  return static_cast<const gsl_spline*>(p.get());
}

std::string fmt_x(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

SampledCurve::SampledCurve(std::vector<double> xs, std::vector<double> zs)
    : xs_(std::move(xs)), zs_(std::move(zs)) {
  if (xs_.size() != zs_.size() || xs_.size() < 3) {
    throw InvalidMediumError("sampled boundary needs at least 3 (x, z) pairs of equal length");
  }
  for (std::size_t i = 1; i < xs_.size(); ++i) {
    if (!(xs_[i] > xs_[i - 1])) {
      throw InvalidMediumError("sampled boundary knots must be strictly increasing in x");
    }
  }
  for (double v : xs_) {
    if (!std::isfinite(v)) throw InvalidMediumError("sampled boundary has non-finite x");
  }
  static const bool handler_off = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)handler_off;
  gsl_spline* spline = gsl_spline_alloc(gsl_interp_cspline, xs_.size());
  if (spline == nullptr) throw InvalidMediumError("failed to allocate spline");
  if (gsl_spline_init(spline, xs_.data(), zs_.data(), xs_.size()) != GSL_SUCCESS) {
    gsl_spline_free(spline);
    throw InvalidMediumError("failed to build spline through boundary samples");
  }
  spline_ = std::shared_ptr<const void>(spline, [](const void* s) {
    gsl_spline_free(const_cast<gsl_spline*>(static_cast<const gsl_spline*>(s)));
  });
}

double SampledCurve::eval(double x) const { return gsl_spline_eval(as_spline(spline_), x, nullptr); }

double SampledCurve::slope(double x) const {
  return gsl_spline_eval_deriv(as_spline(spline_), x, nullptr);
}

double SampledCurve::curvature(double x) const {
  return gsl_spline_eval_deriv2(as_spline(spline_), x, nullptr);
}

BoundaryCurve BoundaryCurve::constant(double depth, Interval domain) {
  return BoundaryCurve(ConstantCurve{depth}, domain);
}

BoundaryCurve BoundaryCurve::linear(double slope, double offset, Interval domain) {
  return BoundaryCurve(LinearCurve{slope, offset}, domain);
}

BoundaryCurve BoundaryCurve::ellipse(double semi_lateral, double semi_depth, Point2 center,
                                     int sign, Interval domain) {
  if (!(semi_lateral > 0.0) || !(semi_depth > 0.0) || (sign != 1 && sign != -1)) {
    throw InvalidMediumError("ellipse needs positive semi-axes and sign +1 or -1");
  }
  return BoundaryCurve(EllipseCurve{semi_lateral, semi_depth, center, sign}, domain);
}

BoundaryCurve BoundaryCurve::sampled(std::vector<double> xs, std::vector<double> zs) {
  SampledCurve curve(std::move(xs), std::move(zs));
  Interval domain{curve.xs().front(), curve.xs().back()};
  return BoundaryCurve(std::move(curve), domain);
}

BoundaryCurve::Kind BoundaryCurve::kind() const {
  return static_cast<Kind>(shape_.index());
}

double BoundaryCurve::check_domain(double x) const {
  if (x >= domain_.lo - kDomainSlack && x <= domain_.hi + kDomainSlack) {
    return std::clamp(x, domain_.lo, domain_.hi);
  }
  throw DomainError("x = " + fmt_x(x) + " m outside boundary domain [" + fmt_x(domain_.lo) +
                    ", " + fmt_x(domain_.hi) + "]");
}

double BoundaryCurve::eval(double x) const {
  x = check_domain(x);
  struct Visitor {
    double x;
    double operator()(const ConstantCurve& c) const { return c.depth; }
    double operator()(const LinearCurve& c) const { return c.slope * x + c.offset; }
    double operator()(const EllipseCurve& c) const {
      const double u = (x - c.center.x) / c.semi_lateral;
      const double r2 = 1.0 - u * u;
      if (r2 < 0.0) throw DomainError("x outside ellipse lateral extent");
      return c.center.z + c.sign * c.semi_depth * std::sqrt(r2);
    }
    double operator()(const SampledCurve& c) const { return c.eval(x); }
  };
  return std::visit(Visitor{x}, shape_);
}

double BoundaryCurve::slope(double x) const {
  x = check_domain(x);
  struct Visitor {
    double x;
    double operator()(const ConstantCurve&) const { return 0.0; }
    double operator()(const LinearCurve& c) const { return c.slope; }
    double operator()(const EllipseCurve& c) const {
      const double xt = x - c.center.x;
      const double u = xt / c.semi_lateral;
      const double r2 = 1.0 - u * u;
      if (!(r2 > 0.0)) throw SingularSlopeError("ellipse slope is unbounded at |x - cx| >= a");
      return -c.sign * (c.semi_depth * xt / (c.semi_lateral * c.semi_lateral)) / std::sqrt(r2);
    }
    double operator()(const SampledCurve& c) const { return c.slope(x); }
  };
  return std::visit(Visitor{x}, shape_);
}

double BoundaryCurve::curvature(double x) const {
  x = check_domain(x);
  struct Visitor {
    double x;
    double operator()(const ConstantCurve&) const { return 0.0; }
    double operator()(const LinearCurve&) const { return 0.0; }
    double operator()(const EllipseCurve& c) const {
      const double u = (x - c.center.x) / c.semi_lateral;
      const double r2 = 1.0 - u * u;
      if (!(r2 > 0.0)) throw SingularSlopeError("ellipse curvature is unbounded at |x - cx| >= a");
      const double r = std::sqrt(r2);
      return -c.sign * (c.semi_depth / (c.semi_lateral * c.semi_lateral)) / (r2 * r);
    }
    double operator()(const SampledCurve& c) const { return c.curvature(x); }
  };
  return std::visit(Visitor{x}, shape_);
}

BoundaryCurve BoundaryCurve::shifted(double dx) const {
  const Interval domain{domain_.lo + dx, domain_.hi + dx};
  struct Visitor {
    double dx;
    Interval domain;
    BoundaryCurve operator()(const ConstantCurve& c) const { return constant(c.depth, domain); }
    BoundaryCurve operator()(const LinearCurve& c) const {
      return linear(c.slope, c.offset - c.slope * dx, domain);
    }
    BoundaryCurve operator()(const EllipseCurve& c) const {
      return ellipse(c.semi_lateral, c.semi_depth, {c.center.x + dx, c.center.z}, c.sign, domain);
    }
    BoundaryCurve operator()(const SampledCurve& c) const {
      std::vector<double> xs = c.xs();
      for (double& x : xs) x += dx;
      return sampled(std::move(xs), c.zs());
    }
  };
  return std::visit(Visitor{dx, domain}, shape_);
}

BoundaryCurve BoundaryCurve::mirrored(double axis) const {
  struct Visitor {
    double axis;
    Interval domain;
    BoundaryCurve operator()(const ConstantCurve& c) const {
      return constant(axis - c.depth, domain);
    }
    BoundaryCurve operator()(const LinearCurve& c) const {
      return linear(-c.slope, axis - c.offset, domain);
    }
    BoundaryCurve operator()(const EllipseCurve& c) const {
      return ellipse(c.semi_lateral, c.semi_depth, {c.center.x, axis - c.center.z}, -c.sign,
                     domain);
    }
    BoundaryCurve operator()(const SampledCurve& c) const {
      std::vector<double> zs = c.zs();
      for (double& z : zs) z = axis - z;
      return sampled(c.xs(), std::move(zs));
    }
  };
  return std::visit(Visitor{axis, domain_}, shape_);
}

double boundary_eval(const BoundaryCurve& curve, double x) { return curve.eval(x); }
double boundary_slope(const BoundaryCurve& curve, double x) { return curve.slope(x); }

Medium::Medium(std::vector<double> speeds, std::vector<BoundaryCurve> boundaries, Interval domain)
    : speeds_(std::move(speeds)), boundaries_(std::move(boundaries)), domain_(domain) {
  if (speeds_.size() < 2) throw InvalidMediumError("a medium needs at least two layers");
  if (boundaries_.size() + 1 != speeds_.size()) {
    throw InvalidMediumError("a medium with N layers needs exactly N-1 boundaries");
  }
  if (!(domain_.hi > domain_.lo)) throw InvalidMediumError("medium domain must have positive width");
  max_speed_ = *std::max_element(speeds_.begin(), speeds_.end());

  // Depth statistics on the ordering grid. Samples falling outside a curve's own
  // domain are clamped; validate_medium reports such mismatches separately.
  const std::size_t n = kOrderingSamples;
  std::vector<std::vector<double>> samples(boundaries_.size(), std::vector<double>(n));
  for (std::size_t b = 0; b < boundaries_.size(); ++b) {
    const Interval& cd = boundaries_[b].domain();
    for (std::size_t i = 0; i < n; ++i) {
      double x = domain_.lo + domain_.width() * static_cast<double>(i) / static_cast<double>(n - 1);
      x = std::clamp(x, cd.lo, cd.hi);
      double z = std::numeric_limits<double>::quiet_NaN();
      try {
        z = boundaries_[b].eval(x);
      } catch (const Error&) {
      }
      samples[b][i] = z;
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double z : samples[b]) {
      if (std::isfinite(z)) {
        lo = std::min(lo, z);
        hi = std::max(hi, z);
      }
    }
    depth_min_.push_back(lo);
    depth_max_.push_back(hi);
  }
  min_separation_ = domain_.width();
  for (std::size_t b = 0; b + 1 < boundaries_.size(); ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const double gap = samples[b + 1][i] - samples[b][i];
      if (std::isfinite(gap)) min_separation_ = std::min(min_separation_, gap);
    }
  }
}

bool Medium::homogeneous() const {
  return std::all_of(speeds_.begin(), speeds_.end(), [&](double c) { return c == speeds_[0]; });
}

std::size_t Medium::layer_of(Point2 p) const {
  for (std::size_t i = 0; i < boundaries_.size(); ++i) {
    if (p.z < depth_min_[i]) return i;
    if (p.z > depth_max_[i]) continue;
    if (p.z <= boundaries_[i].eval(p.x)) return i;
  }
  return boundaries_.size();
}

Medium Medium::truncated(std::size_t layers) const {
  if (layers < 1 || layers > speeds_.size()) throw std::out_of_range("truncated layer count");
  if (layers == speeds_.size()) return *this;
  if (layers == 1) throw InvalidMediumError("a truncated medium needs at least two layers");
  return Medium(std::vector<double>(speeds_.begin(), speeds_.begin() + layers),
                std::vector<BoundaryCurve>(boundaries_.begin(), boundaries_.begin() + (layers - 1)),
                domain_);
}

Medium Medium::shifted(double dx) const {
  std::vector<BoundaryCurve> moved;
  moved.reserve(boundaries_.size());
  for (const auto& b : boundaries_) moved.push_back(b.shifted(dx));
  return Medium(speeds_, std::move(moved), {domain_.lo + dx, domain_.hi + dx});
}

Medium Medium::with_scaled_speeds(double factor) const {
  std::vector<double> scaled = speeds_;
  for (double& c : scaled) c *= factor;
  return Medium(std::move(scaled), boundaries_, domain_);
}

Medium Medium::mirrored(double axis) const {
  std::vector<BoundaryCurve> flipped;
  flipped.reserve(boundaries_.size());
  for (auto it = boundaries_.rbegin(); it != boundaries_.rend(); ++it) {
    flipped.push_back(it->mirrored(axis));
  }
  return Medium(std::vector<double>(speeds_.rbegin(), speeds_.rend()), std::move(flipped), domain_);
}

ValidationReport validate_medium(const Medium& medium) {
  ValidationReport report;
  auto& v = report.violations;
  const Interval dom = medium.domain();
  if (!std::isfinite(dom.lo) || !std::isfinite(dom.hi)) v.push_back("domain: non-finite bounds");

  for (std::size_t i = 0; i < medium.layer_count(); ++i) {
    const double c = medium.speed(i);
    if (!std::isfinite(c) || !(c > 0.0)) {
      v.push_back("speed: layer " + std::to_string(i) + " has non-positive or non-finite speed");
    }
  }

  const double tol = kDomainSlack;
  bool sampled_ok = true;
  for (std::size_t b = 0; b < medium.boundary_count(); ++b) {
    const BoundaryCurve& curve = medium.boundary(b);
    const std::string tag = "boundary " + std::to_string(b) + ": ";
    const Interval cd = curve.domain();
    if (cd.lo > dom.lo + tol || cd.hi < dom.hi - tol) {
      v.push_back(tag + "domain mismatch, curve domain does not cover the medium domain");
      sampled_ok = false;
    }
    if (const auto* e = std::get_if<EllipseCurve>(&curve.shape())) {
      const double reach = std::max(std::abs(dom.lo - e->center.x), std::abs(dom.hi - e->center.x));
      if (!(reach < e->semi_lateral)) {
        v.push_back(tag + "domain violation, ellipse requires |x - cx| < a on the whole domain");
        sampled_ok = false;
      }
    }
    if (const auto* s = std::get_if<SampledCurve>(&curve.shape())) {
      for (double z : s->zs()) {
        if (!std::isfinite(z)) {
          v.push_back(tag + "non-finite sample");
          sampled_ok = false;
          break;
        }
      }
    }
    if (const auto* l = std::get_if<LinearCurve>(&curve.shape())) {
      if (!std::isfinite(l->slope) || !std::isfinite(l->offset)) {
        v.push_back(tag + "non-finite coefficients");
        sampled_ok = false;
      }
    }
    if (const auto* c = std::get_if<ConstantCurve>(&curve.shape())) {
      if (!std::isfinite(c->depth)) {
        v.push_back(tag + "non-finite depth");
        sampled_ok = false;
      }
    }
  }
  if (!sampled_ok) return report;

  const std::size_t n = kOrderingSamples;
  double worst_top = std::numeric_limits<double>::infinity();
  double worst_top_x = 0.0;
  std::vector<double> worst_gap(medium.boundary_count(), std::numeric_limits<double>::infinity());
  std::vector<double> worst_gap_x(medium.boundary_count(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = dom.lo + dom.width() * static_cast<double>(i) / static_cast<double>(n - 1);
    double prev = 0.0;
    for (std::size_t b = 0; b < medium.boundary_count(); ++b) {
      const double z = medium.boundary(b).eval(x);
      if (b == 0) {
        if (z < worst_top) {
          worst_top = z;
          worst_top_x = x;
        }
      } else if (z - prev < worst_gap[b]) {
        worst_gap[b] = z - prev;
        worst_gap_x[b] = x;
      }
      prev = z;
    }
  }
  if (!(worst_top > 0.0)) {
    v.push_back("boundary 0: touches or crosses the array plane z = 0 at x = " +
                fmt_x(worst_top_x));
  }
  for (std::size_t b = 1; b < medium.boundary_count(); ++b) {
    if (!(worst_gap[b] > 0.0)) {
      v.push_back("ordering: boundary " + std::to_string(b - 1) + " is not above boundary " +
                  std::to_string(b) + " at x = " + fmt_x(worst_gap_x[b]));
    }
  }
  return report;
}

Medium make_validated_medium(std::vector<double> speeds, std::vector<BoundaryCurve> boundaries,
                             Interval domain) {
  Medium medium(std::move(speeds), std::move(boundaries), domain);
  const ValidationReport report = validate_medium(medium);
  if (!report.valid()) {
    std::string msg = "invalid medium:";
    for (const auto& s : report.violations) msg += "\n  " + s;
    throw InvalidMediumError(msg);
  }
  return medium;
}

}  // namespace goat
