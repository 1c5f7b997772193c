#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "goat/geometry.hpp"
#include "goat/goatsolve.hpp"
#include "goat/medium.hpp"

namespace goat {

struct ElementArray {
  std::vector<Point2> positions;
  double pitch = 0.0;

  std::size_t size() const { return positions.size(); }

  /// `count` elements spaced by `pitch` on the line z, centred on x_center.
  static ElementArray linear(std::size_t count, double pitch, double z, double x_center = 0.0);
};

/// Throws SchemaError unless the array has at least two distinct elements.
void validate_array(const ElementArray& array);

enum class Engine { hmfa, goat };
enum class DelayKind { transmit, receive };

std::string to_string(Engine engine);
std::string to_string(DelayKind kind);

struct DelayFailure {
  std::size_t element;
  std::size_t focus;
  std::string cause;
};

struct DelayTable {
  DelayKind kind = DelayKind::receive;
  Engine engine = Engine::hmfa;
  std::vector<Point2> focus_points;
  std::size_t element_count = 0;
  /// Focus-major: delays[f * element_count + m]; NaN where the solve failed.
  std::vector<double> delays;
  std::vector<DelayFailure> failures;

  double at(std::size_t element, std::size_t focus) const {
    return delays[focus * element_count + element];
  }
};

/// max(tofs) - tofs[m].
std::vector<double> transmit_delays(const std::vector<double>& tofs);
/// tofs[m] + t_transmit.
std::vector<double> receive_delays(const std::vector<double>& tofs, double t_transmit);

struct FocusingOptions {
  double reference_speed = 1540.0;  // HMFA speed, m/s
  /// Element whose single-element transmission defines t_transmit; centre by default.
  std::optional<std::size_t> transmit_element;
  SolverOptions solver;
};

/// Element-to-point ToF by the chosen engine.
class DelayEngine {
 public:
  DelayEngine(Engine engine, const Medium& medium, const FocusingOptions& opts);

  Engine engine() const { return engine_; }
  /// Throws the solver's error on failure.
  double tof(Point2 element, Point2 point) const;

 private:
  Engine engine_;
  double reference_speed_;
  TofEngine goat_;
};

DelayTable build_delay_table(const ElementArray& array, const std::vector<Point2>& foci,
                             const Medium& medium, Engine engine, DelayKind kind,
                             const FocusingOptions& opts = {});

/// Writes the provenance comment, the kind/engine header and one row per (focus, element).
void write_delay_csv(std::ostream& out, const DelayTable& table, const std::string& provenance);

/// Shortest decimal that round-trips to the same double; "nan" for NaN.
std::string format_shortest(double value);

}  // namespace goat
