#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace goat {

// Exit-code families used by the command line front end.
enum class ErrorFamily {
  schema = 2,
  convergence = 3,
  physics = 4,
  io = 5,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept = 0;
  virtual ErrorFamily family() const noexcept { return ErrorFamily::physics; }
};

#define GOAT_DEFINE_ERROR(Name, Family)                                     \
  class Name : public Error {                                               \
   public:                                                                  \
    using Error::Error;                                                     \
    const char* kind() const noexcept override { return #Name; }            \
    ErrorFamily family() const noexcept override { return ErrorFamily::Family; } \
  };

GOAT_DEFINE_ERROR(DomainError, physics)
GOAT_DEFINE_ERROR(SingularSlopeError, physics)
GOAT_DEFINE_ERROR(DegenerateSegmentError, physics)
GOAT_DEFINE_ERROR(DegenerateDenominatorError, physics)
GOAT_DEFINE_ERROR(RoiError, physics)
GOAT_DEFINE_ERROR(SchemaError, schema)
GOAT_DEFINE_ERROR(InvalidMediumError, schema)
GOAT_DEFINE_ERROR(IoError, io)

#undef GOAT_DEFINE_ERROR

/// Snell's law admits no transmitted angle at a boundary crossing.
class TotalReflectionError : public Error {
 public:
  TotalReflectionError(const std::string& what, std::optional<std::size_t> boundary = {},
                       double sine_ratio = 0.0)
      : Error(what), boundary_(boundary), sine_ratio_(sine_ratio) {}
  const char* kind() const noexcept override { return "TotalReflectionError"; }
  std::optional<std::size_t> boundary() const { return boundary_; }
  /// |(c_out / c_in) sin(theta_in)|, the value that exceeded one.
  double sine_ratio() const { return sine_ratio_; }

 private:
  std::optional<std::size_t> boundary_;
  double sine_ratio_;
};

class NoIntersectionError : public Error {
 public:
  NoIntersectionError(const std::string& what, std::optional<std::size_t> layer = {})
      : Error(what), layer_(layer) {}
  const char* kind() const noexcept override { return "NoIntersectionError"; }
  std::optional<std::size_t> layer() const { return layer_; }

 private:
  std::optional<std::size_t> layer_;
};

/// Newton iteration gave up; carries the best iterate seen.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> best_xs = {},
                      double best_residual = 0.0)
      : Error(what), best_xs_(std::move(best_xs)), best_residual_(best_residual) {}
  const char* kind() const noexcept override { return "NonConvergenceError"; }
  ErrorFamily family() const noexcept override { return ErrorFamily::convergence; }
  const std::vector<double>& best_xs() const { return best_xs_; }
  double best_residual() const { return best_residual_; }

 private:
  std::vector<double> best_xs_;
  double best_residual_;
};

/// The shooting scan found no sign change of the terminal offset.
class NoBracketError : public Error {
 public:
  NoBracketError(const std::string& what, std::size_t traced, std::size_t total_reflections,
                 std::size_t missed)
      : Error(what), traced_(traced), total_reflections_(total_reflections), missed_(missed) {}
  const char* kind() const noexcept override { return "NoBracketError"; }
  ErrorFamily family() const noexcept override { return ErrorFamily::convergence; }
  std::size_t traced() const { return traced_; }
  std::size_t total_reflections() const { return total_reflections_; }
  std::size_t missed() const { return missed_; }

 private:
  std::size_t traced_;
  std::size_t total_reflections_;
  std::size_t missed_;
};

}  // namespace goat
