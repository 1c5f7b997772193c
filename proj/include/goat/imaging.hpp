#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "goat/focusing.hpp"
#include "goat/geometry.hpp"
#include "goat/medium.hpp"

namespace goat {

/// Gaussian-modulated sinusoid exp(-t^2 / 2 sigma^2) cos(2 pi f0 t). The spectral
/// full width at half maximum equals fractional_bandwidth * f0.
struct Pulse {
  double center_frequency = 5e6;
  double fractional_bandwidth = 0.6;

  double sigma() const;
  double operator()(double t) const;
  /// Half-width beyond which the pulse is treated as zero.
  double half_support() const { return 6.0 * sigma(); }
};

void validate_pulse(const Pulse& pulse);

struct Scatterer {
  Point2 position;
  double amplitude = 1.0;
};

/// Full synthetic aperture traces, trace(tx, rx) = samples[(tx * n_rx + rx) * n_samples + j].
struct ChannelDataSet {
  std::size_t n_tx = 0;
  std::size_t n_rx = 0;
  std::size_t n_samples = 0;
  double sample_rate = 0.0;
  double t0 = 0.0;
  std::vector<double> samples;
  /// Element/scatterer pairs whose ToF could not be computed.
  std::vector<std::string> omitted;

  const double* trace(std::size_t tx, std::size_t rx) const {
    return samples.data() + (tx * n_rx + rx) * n_samples;
  }
};

ChannelDataSet synthesize_channels(const Medium& medium, const ElementArray& array,
                                   const std::vector<Scatterer>& scatterers, const Pulse& pulse,
                                   double sample_rate, double duration,
                                   const SolverOptions& solver = {});

/// Binary layout: magic "GOATCD1\n", u32 n_tx, u32 n_rx, u32 n_samples, f64 sample_rate,
/// f64 t0, u32 provenance length, provenance bytes, then float32 samples; little-endian.
void write_channels(std::ostream& out, const ChannelDataSet& data, const std::string& provenance);
ChannelDataSet read_channels(std::istream& in, std::string* provenance = nullptr);

/// Magnitude of the discrete analytic signal.
std::vector<double> envelope(const std::vector<double>& trace);

struct ImageGrid {
  double x0 = 0.0;
  double z0 = 0.0;
  double dx = 1e-4;
  double dz = 1e-4;
  std::size_t nx = 0;
  std::size_t nz = 0;

  double x(std::size_t i) const { return x0 + dx * static_cast<double>(i); }
  double z(std::size_t j) const { return z0 + dz * static_cast<double>(j); }
  /// Grid covering [x_lo, x_hi] x [z_lo, z_hi] with the given spacing.
  static ImageGrid covering(double x_lo, double x_hi, double z_lo, double z_hi, double spacing);
};

enum class Scale { linear, db };

/// Row-major (z rows, x fastest). NaN marks pixels without any valid delay.
struct Image {
  ImageGrid grid;
  std::vector<double> values;
  Scale scale = Scale::linear;
  Engine engine = Engine::hmfa;

  double at(std::size_t ix, std::size_t iz) const { return values[iz * grid.nx + ix]; }
};

struct BeamformOptions {
  FocusingOptions focusing;
  double center_frequency = 5e6;  // sets the internal depth oversampling
};

/// Depth oversampling factor so that the internal row spacing is at most a wavelength / 8.
std::size_t depth_oversampling(const ImageGrid& grid, double reference_speed,
                               double center_frequency);

/// Delay-and-sum before envelope detection, on `grid` exactly.
Image beamform_rf(const ChannelDataSet& channels, const Medium& medium, const ElementArray& array,
                  const ImageGrid& grid, Engine engine, const BeamformOptions& opts = {});

/// Delay-and-sum with envelope detection per image column; linear amplitude.
Image das_beamform(const ChannelDataSet& channels, const Medium& medium, const ElementArray& array,
                   const ImageGrid& grid, Engine engine, const BeamformOptions& opts = {});

/// 20 log10(v / max), clamped at floor_db; NaN pixels stay NaN.
Image to_db(const Image& image, double floor_db = -60.0);

struct Roi {
  double x_lo = 0.0;
  double x_hi = 0.0;
  double z_lo = 0.0;
  double z_hi = 0.0;

  static Roi centered(Point2 c, double width, double height) {
    return {c.x - 0.5 * width, c.x + 0.5 * width, c.z - 0.5 * height, c.z + 0.5 * height};
  }
};

struct BeamProfile {
  std::vector<double> lateral_axis;
  std::vector<double> values_db;
  double fwhm = 0.0;
  double peak_to_background_db = 0.0;
  Roi roi;
  Point2 peak;  // location of the maximum inside the roi
};

/// Lateral maximum-intensity projection over the roi; width measured at -6 dB.
BeamProfile beam_profile(const Image& image, const Roi& roi);

/// P5 graymap of a dB image, [-60, 0] dB mapped to [0, 255].
void write_pgm(std::ostream& out, const Image& db_image, const std::string& provenance);
void write_profile_csv(std::ostream& out, const BeamProfile& profile,
                       const std::string& provenance);

}  // namespace goat
