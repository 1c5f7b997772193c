#include "goat/focusing.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "goat/errors.hpp"

namespace goat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

ElementArray ElementArray::linear(std::size_t count, double pitch, double z, double x_center) {
  ElementArray a;
  a.pitch = pitch;
  const double half = 0.5 * static_cast<double>(count > 0 ? count - 1 : 0);
  for (std::size_t m = 0; m < count; ++m) {
    a.positions.push_back({x_center + (static_cast<double>(m) - half) * pitch, z});
  }
  return a;
}

void validate_array(const ElementArray& array) {
  if (array.size() < 2) throw SchemaError("an element array needs at least two elements");
  for (const Point2& p : array.positions) {
    if (!p.finite()) throw SchemaError("element positions must be finite");
  }
  for (std::size_t i = 0; i < array.size(); ++i) {
    for (std::size_t j = i + 1; j < array.size(); ++j) {
      if (array.positions[i] == array.positions[j]) {
        throw SchemaError("element positions must be distinct");
      }
    }
  }
}

std::string to_string(Engine engine) { return engine == Engine::hmfa ? "hmfa" : "goat"; }

std::string to_string(DelayKind kind) {
  return kind == DelayKind::transmit ? "transmit" : "receive";
}

std::vector<double> transmit_delays(const std::vector<double>& tofs) {
  if (tofs.empty()) return {};
  const double t_max = *std::max_element(tofs.begin(), tofs.end());
  std::vector<double> d(tofs.size());
  for (std::size_t m = 0; m < tofs.size(); ++m) d[m] = t_max - tofs[m];
  return d;
}

std::vector<double> receive_delays(const std::vector<double>& tofs, double t_transmit) {
  std::vector<double> d(tofs.size());
  for (std::size_t m = 0; m < tofs.size(); ++m) d[m] = tofs[m] + t_transmit;
  return d;
}

DelayEngine::DelayEngine(Engine engine, const Medium& medium, const FocusingOptions& opts)
    : engine_(engine), reference_speed_(opts.reference_speed), goat_(medium, opts.solver) {
  if (!(reference_speed_ > 0.0)) throw SchemaError("reference speed must be positive");
}

double DelayEngine::tof(Point2 element, Point2 point) const {
  if (engine_ == Engine::hmfa) return hmfa_tof(element, point, reference_speed_);
  return goat_.tof(element, point);
}

DelayTable build_delay_table(const ElementArray& array, const std::vector<Point2>& foci,
                             const Medium& medium, Engine engine, DelayKind kind,
                             const FocusingOptions& opts) {
  validate_array(array);
  const std::size_t m_count = array.size();
  const std::size_t tx = opts.transmit_element.value_or((m_count - 1) / 2);
  if (tx >= m_count) throw SchemaError("transmit element index out of range");

  DelayTable table;
  table.kind = kind;
  table.engine = engine;
  table.focus_points = foci;
  table.element_count = m_count;
  table.delays.assign(foci.size() * m_count, kNaN);
  if (foci.empty()) return table;

  const DelayEngine delays(engine, medium, opts);
  const std::size_t pairs = foci.size() * m_count;
  std::vector<double> tofs(pairs, kNaN);
  std::vector<std::exception_ptr> errors(pairs);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, pairs),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t i = r.begin(); i != r.end(); ++i) {
                        try {
                          tofs[i] = delays.tof(array.positions[i % m_count], foci[i / m_count]);
                        } catch (const Error&) {
                          errors[i] = std::current_exception();
                        }
                      }
                    });

  std::exception_ptr first;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    if (!errors[i]) continue;
    ++failed;
    if (!first) first = errors[i];
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      table.failures.push_back({i % m_count, i / m_count, std::string(e.kind()) + ": " + e.what()});
    }
  }
  if (failed == pairs) std::rethrow_exception(first);

  for (std::size_t f = 0; f < foci.size(); ++f) {
    const double* t = &tofs[f * m_count];
    double* d = &table.delays[f * m_count];
    if (kind == DelayKind::transmit) {
      double t_max = -std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < m_count; ++m) {
        if (!std::isnan(t[m])) t_max = std::max(t_max, t[m]);
      }
      for (std::size_t m = 0; m < m_count; ++m) d[m] = std::isnan(t[m]) ? kNaN : t_max - t[m];
    } else {
      const double t_transmit = t[tx];
      for (std::size_t m = 0; m < m_count; ++m) d[m] = t[m] + t_transmit;
    }
  }
  return table;
}

std::string format_shortest(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_delay_csv(std::ostream& out, const DelayTable& table, const std::string& provenance) {
  out << "# " << provenance << '\n';
  out << "kind,engine\n" << to_string(table.kind) << ',' << to_string(table.engine) << '\n';
  out << "focus_x_m,focus_z_m,element_index,delay_s\n";
  for (std::size_t f = 0; f < table.focus_points.size(); ++f) {
    const Point2 p = table.focus_points[f];
    for (std::size_t m = 0; m < table.element_count; ++m) {
      out << format_shortest(p.x) << ',' << format_shortest(p.z) << ',' << m << ','
          << format_shortest(table.at(m, f)) << '\n';
    }
  }
  if (!out) throw IoError("failed to write delay table");
}

}  // namespace goat
