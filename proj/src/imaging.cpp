#include "goat/imaging.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>

#include <fftw3.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "goat/errors.hpp"
#include "goat/goatsolve.hpp"

namespace goat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr char kChannelMagic[8] = {'G', 'O', 'A', 'T', 'C', 'D', '1', '\n'};
constexpr std::size_t kPixelBlock = 2048;

static_assert(std::endian::native == std::endian::little, "channel I/O assumes little-endian");

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated channel data file");
  return v;
}

// tofs[m * pixels + p] for every element and pixel; NaN where the solve failed.
std::vector<double> element_tofs(const DelayEngine& engine, const ElementArray& array,
                                 const ImageGrid& grid) {
  const std::size_t pixels = grid.nx * grid.nz;
  const std::size_t m_count = array.size();
  std::vector<double> tofs(m_count * pixels, kNaN);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, m_count * grid.nz),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t row = r.begin(); row != r.end(); ++row) {
                        const std::size_t m = row / grid.nz;
                        const std::size_t iz = row % grid.nz;
                        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
                          const Point2 p{grid.x(ix), grid.z(iz)};
                          try {
                            tofs[m * pixels + iz * grid.nx + ix] =
                                engine.tof(array.positions[m], p);
                          } catch (const Error&) {
                          }
                        }
                      }
                    });
  return tofs;
}

// Sum over (tx, rx) of the trace sampled at tof_tx + tof_rx. Per pixel the pairs are
// accumulated tx-major, then rx, independent of how pixels are split across workers.
std::vector<double> delay_and_sum(const ChannelDataSet& ch, const std::vector<double>& tofs,
                                  std::size_t m_count, std::size_t pixels) {
  std::vector<double> out(pixels, 0.0);
  std::vector<unsigned> used(pixels, 0);
  const double fs = ch.sample_rate;
  const double n_last = static_cast<double>(ch.n_samples) - 1.0;
  tbb::parallel_for(
      tbb::blocked_range<std::size_t>(0, pixels, kPixelBlock),
      [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t tx = 0; tx < m_count; ++tx) {
          const double* ttx = &tofs[tx * pixels];
          for (std::size_t rx = 0; rx < m_count; ++rx) {
            const double* trx = &tofs[rx * pixels];
            const double* trace = ch.trace(tx, rx);
            for (std::size_t p = r.begin(); p != r.end(); ++p) {
              const double tau = ttx[p] + trx[p];
              if (std::isnan(tau)) continue;
              ++used[p];
              const double s = (tau - ch.t0) * fs;
              if (!(s >= 0.0) || !(s < n_last)) continue;
              const auto i = static_cast<std::size_t>(s);
              const double frac = s - static_cast<double>(i);
              out[p] += trace[i] + frac * (trace[i + 1] - trace[i]);
            }
          }
        }
      });
  for (std::size_t p = 0; p < pixels; ++p) {
    if (used[p] == 0) out[p] = kNaN;
  }
  return out;
}

void check_channels(const ChannelDataSet& ch, const ElementArray& array) {
  if (ch.n_tx != array.size() || ch.n_rx != array.size()) {
    throw SchemaError("channel data dimensions do not match the element array");
  }
  if (ch.n_samples < 2 || !(ch.sample_rate > 0.0)) throw SchemaError("empty channel data");
}

}  // namespace

double Pulse::sigma() const {
  const double sigma_f =
      fractional_bandwidth * center_frequency / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  return 1.0 / (2.0 * std::numbers::pi * sigma_f);
}

double Pulse::operator()(double t) const {
  const double s = sigma();
  return std::exp(-0.5 * t * t / (s * s)) * std::cos(2.0 * std::numbers::pi * center_frequency * t);
}

void validate_pulse(const Pulse& pulse) {
  if (!(pulse.center_frequency > 0.0)) throw SchemaError("pulse center frequency must be positive");
  if (!(pulse.fractional_bandwidth > 0.0 && pulse.fractional_bandwidth < 2.0)) {
    throw SchemaError("pulse fractional bandwidth must lie in (0, 2)");
  }
}

ChannelDataSet synthesize_channels(const Medium& medium, const ElementArray& array,
                                   const std::vector<Scatterer>& scatterers, const Pulse& pulse,
                                   double sample_rate, double duration,
                                   const SolverOptions& solver) {
  validate_pulse(pulse);
  validate_array(array);
  if (!(sample_rate > 2.0 * pulse.center_frequency * (1.0 + pulse.fractional_bandwidth))) {
    throw SchemaError("sample rate is too low for the pulse bandwidth");
  }
  if (!(duration > 0.0)) throw SchemaError("record duration must be positive");

  const std::size_t m_count = array.size();
  const std::size_t k_count = scatterers.size();
  const TofEngine engine(medium, solver);

  std::vector<double> tof(m_count * k_count, kNaN);
  std::vector<std::string> cause(m_count * k_count);
  tbb::parallel_for(std::size_t{0}, m_count * k_count, [&](std::size_t i) {
    try {
      tof[i] = engine.tof(array.positions[i / k_count], scatterers[i % k_count].position);
    } catch (const Error& e) {
      cause[i] = std::string(e.kind()) + ": " + e.what();
    }
  });

  ChannelDataSet ch;
  ch.n_tx = m_count;
  ch.n_rx = m_count;
  ch.sample_rate = sample_rate;
  ch.t0 = 0.0;
  ch.n_samples = static_cast<std::size_t>(std::ceil(duration * sample_rate));
  ch.samples.assign(m_count * m_count * ch.n_samples, 0.0);
  for (std::size_t i = 0; i < cause.size(); ++i) {
    if (!cause[i].empty()) {
      ch.omitted.push_back("element " + std::to_string(i / k_count) + ", scatterer " +
                           std::to_string(i % k_count) + ": " + cause[i]);
    }
  }

  const double half = pulse.half_support();
  const double last = static_cast<double>(ch.n_samples) - 1.0;
  tbb::parallel_for(std::size_t{0}, m_count, [&](std::size_t tx) {
    for (std::size_t rx = 0; rx < m_count; ++rx) {
      double* trace = ch.samples.data() + (tx * m_count + rx) * ch.n_samples;
      for (std::size_t k = 0; k < k_count; ++k) {
        const double tau = tof[tx * k_count + k] + tof[rx * k_count + k];
        if (std::isnan(tau)) continue;
        const double lo = std::max(0.0, std::ceil((tau - half) * sample_rate));
        const double hi = std::min(last, std::floor((tau + half) * sample_rate));
        for (double j = lo; j <= hi; j += 1.0) {
          trace[static_cast<std::size_t>(j)] +=
              scatterers[k].amplitude * pulse(j / sample_rate - tau);
        }
      }
    }
  });
  return ch;
}

void write_channels(std::ostream& out, const ChannelDataSet& data, const std::string& provenance) {
  out.write(kChannelMagic, sizeof(kChannelMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.n_tx));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.n_rx));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.n_samples));
  put<double>(out, data.sample_rate);
  put<double>(out, data.t0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(provenance.size()));
  out.write(provenance.data(), static_cast<std::streamsize>(provenance.size()));
  std::vector<float> buf(data.n_samples);
  for (std::size_t t = 0; t < data.n_tx * data.n_rx; ++t) {
    const double* src = data.samples.data() + t * data.n_samples;
    std::transform(src, src + data.n_samples, buf.begin(),
                   [](double v) { return static_cast<float>(v); });
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed to write channel data");
}

ChannelDataSet read_channels(std::istream& in, std::string* provenance) {
  char magic[sizeof(kChannelMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kChannelMagic, sizeof(magic)) != 0) {
    throw IoError("not a channel data file");
  }
  ChannelDataSet ch;
  ch.n_tx = get<std::uint32_t>(in);
  ch.n_rx = get<std::uint32_t>(in);
  ch.n_samples = get<std::uint32_t>(in);
  ch.sample_rate = get<double>(in);
  ch.t0 = get<double>(in);
  std::string prov(get<std::uint32_t>(in), '\0');
  in.read(prov.data(), static_cast<std::streamsize>(prov.size()));
  if (!in) throw IoError("truncated channel data file");
  if (provenance) *provenance = prov;
  std::vector<float> buf(ch.n_tx * ch.n_rx * ch.n_samples);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw IoError("truncated channel data file");
  ch.samples.assign(buf.begin(), buf.end());
  return ch;
}

std::vector<double> envelope(const std::vector<double>& trace) {
  const std::size_t n = trace.size();
  if (n == 0) return {};
  fftw_complex* buf = fftw_alloc_complex(n);
  fftw_plan fwd;
  fftw_plan bwd;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    const int len = static_cast<int>(n);
    fwd = fftw_plan_dft_1d(len, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_1d(len, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n; ++i) {
    buf[i][0] = trace[i];
    buf[i][1] = 0.0;
  }
  fftw_execute(fwd);
  // Keep DC (and Nyquist for even n), double positive frequencies, drop negative ones.
  const std::size_t half = n / 2;
  for (std::size_t i = 1; i < n; ++i) {
    double gain = 0.0;
    if (i < (n + 1) / 2) gain = 2.0;
    else if (n % 2 == 0 && i == half) gain = 1.0;
    buf[i][0] *= gain;
    buf[i][1] *= gain;
  }
  fftw_execute(bwd);
  std::vector<double> out(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::hypot(buf[i][0], buf[i][1]) * scale;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  fftw_free(buf);
  return out;
}

ImageGrid ImageGrid::covering(double x_lo, double x_hi, double z_lo, double z_hi,
                              double spacing) {
  if (!(spacing > 0.0) || !(x_hi >= x_lo) || !(z_hi >= z_lo)) {
    throw SchemaError("invalid image grid extents");
  }
  ImageGrid g;
  g.x0 = x_lo;
  g.z0 = z_lo;
  g.dx = spacing;
  g.dz = spacing;
  g.nx = static_cast<std::size_t>(std::llround((x_hi - x_lo) / spacing)) + 1;
  g.nz = static_cast<std::size_t>(std::llround((z_hi - z_lo) / spacing)) + 1;
  return g;
}

std::size_t depth_oversampling(const ImageGrid& grid, double reference_speed,
                               double center_frequency) {
  const double lambda = reference_speed / center_frequency;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(grid.dz / (lambda / 8.0))));
}

Image beamform_rf(const ChannelDataSet& channels, const Medium& medium, const ElementArray& array,
                  const ImageGrid& grid, Engine engine, const BeamformOptions& opts) {
  check_channels(channels, array);
  const DelayEngine delays(engine, medium, opts.focusing);
  const std::vector<double> tofs = element_tofs(delays, array, grid);
  Image img;
  img.grid = grid;
  img.engine = engine;
  img.values = delay_and_sum(channels, tofs, array.size(), grid.nx * grid.nz);
  return img;
}

Image das_beamform(const ChannelDataSet& channels, const Medium& medium, const ElementArray& array,
                   const ImageGrid& grid, Engine engine, const BeamformOptions& opts) {
  check_channels(channels, array);
  const std::size_t m_count = array.size();
  const DelayEngine delays(engine, medium, opts.focusing);
  const std::vector<double> coarse = element_tofs(delays, array, grid);

  // Depth-oversampled grid; ToFs are interpolated linearly between pixel rows.
  const std::size_t k = grid.nz > 1 ? depth_oversampling(grid, opts.focusing.reference_speed,
                                                         opts.center_frequency)
                                    : 1;
  ImageGrid fine = grid;
  fine.nz = (grid.nz - 1) * k + 1;
  fine.dz = grid.dz / static_cast<double>(k);
  const std::size_t nx = grid.nx;
  const std::size_t coarse_px = grid.nx * grid.nz;
  const std::size_t fine_px = fine.nx * fine.nz;
  std::vector<double> tofs(m_count * fine_px);
  tbb::parallel_for(std::size_t{0}, m_count, [&](std::size_t m) {
    const double* c = &coarse[m * coarse_px];
    double* f = &tofs[m * fine_px];
    for (std::size_t jf = 0; jf < fine.nz; ++jf) {
      const std::size_t j = jf / k;
      const std::size_t r = jf % k;
      const double w = static_cast<double>(r) / static_cast<double>(k);
      for (std::size_t ix = 0; ix < nx; ++ix) {
        const double a = c[j * nx + ix];
        f[jf * nx + ix] = r == 0 ? a : a + w * (c[(j + 1) * nx + ix] - a);
      }
    }
  });
  const std::vector<double> rf = delay_and_sum(channels, tofs, m_count, fine_px);

  Image img;
  img.grid = grid;
  img.engine = engine;
  img.values.assign(coarse_px, kNaN);
  tbb::parallel_for(std::size_t{0}, nx, [&](std::size_t ix) {
    std::vector<double> column(fine.nz);
    for (std::size_t jf = 0; jf < fine.nz; ++jf) {
      const double v = rf[jf * nx + ix];
      column[jf] = std::isnan(v) ? 0.0 : v;
    }
    const std::vector<double> env = envelope(column);
    for (std::size_t j = 0; j < grid.nz; ++j) {
      if (!std::isnan(rf[j * k * nx + ix])) img.values[j * nx + ix] = env[j * k];
    }
  });
  return img;
}

Image to_db(const Image& image, double floor_db) {
  if (image.scale == Scale::db) return image;
  double peak = 0.0;
  for (double v : image.values) {
    if (!std::isnan(v)) peak = std::max(peak, std::abs(v));
  }
  Image out = image;
  out.scale = Scale::db;
  for (double& v : out.values) {
    if (std::isnan(v)) continue;
    v = peak > 0.0 ? std::max(floor_db, 20.0 * std::log10(std::abs(v) / peak)) : floor_db;
  }
  return out;
}

BeamProfile beam_profile(const Image& image, const Roi& roi) {
  const ImageGrid& g = image.grid;
  std::vector<std::size_t> cols;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < g.nx; ++i) {
    if (g.x(i) >= roi.x_lo && g.x(i) <= roi.x_hi) cols.push_back(i);
  }
  for (std::size_t j = 0; j < g.nz; ++j) {
    if (g.z(j) >= roi.z_lo && g.z(j) <= roi.z_hi) rows.push_back(j);
  }
  if (cols.size() < 3 || rows.empty()) throw RoiError("roi does not cover enough image pixels");

  auto amplitude = [&](double v) {
    return image.scale == Scale::db ? std::pow(10.0, v / 20.0) : std::abs(v);
  };
  BeamProfile prof;
  prof.roi = roi;
  std::vector<double> mip(cols.size(), 0.0);
  double peak = 0.0;
  std::size_t peak_col = 0;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t j : rows) {
      const double v = image.at(cols[c], j);
      if (std::isnan(v)) continue;
      const double a = amplitude(v);
      if (a > mip[c]) mip[c] = a;
      if (a > peak) {
        peak = a;
        peak_col = c;
        prof.peak = {g.x(cols[c]), g.z(j)};
      }
    }
  }
  if (!(peak > 0.0)) throw RoiError("roi contains no signal");

  for (std::size_t c = 0; c < cols.size(); ++c) {
    prof.lateral_axis.push_back(g.x(cols[c]));
    prof.values_db.push_back(mip[c] > 0.0 ? 20.0 * std::log10(mip[c] / peak)
                                          : -std::numeric_limits<double>::infinity());
  }

  // Background: median of the outer quarter of columns, half on each side.
  const std::size_t per_side = std::max<std::size_t>(1, (cols.size() + 7) / 8);
  std::vector<double> outer;
  for (std::size_t c = 0; c < per_side; ++c) {
    outer.push_back(prof.values_db[c]);
    outer.push_back(prof.values_db[cols.size() - 1 - c]);
  }
  std::sort(outer.begin(), outer.end());
  const std::size_t h = outer.size() / 2;
  const double median = outer.size() % 2 ? outer[h] : 0.5 * (outer[h - 1] + outer[h]);
  prof.peak_to_background_db = -median;
  if (!(prof.peak_to_background_db > 6.0)) {
    throw RoiError("roi contains no peak 6 dB above its background");
  }

  // -6 dB crossings either side of the peak; the roi edge bounds a missing crossing.
  constexpr double kLevel = -6.0;
  const auto& v = prof.values_db;
  const auto& x = prof.lateral_axis;
  double left = x.front();
  for (std::size_t c = peak_col; c-- > 0;) {
    if (v[c] < kLevel) {
      left = x[c] + (kLevel - v[c]) / (v[c + 1] - v[c]) * (x[c + 1] - x[c]);
      break;
    }
  }
  double right = x.back();
  for (std::size_t c = peak_col + 1; c < v.size(); ++c) {
    if (v[c] < kLevel) {
      right = x[c - 1] + (kLevel - v[c - 1]) / (v[c] - v[c - 1]) * (x[c] - x[c - 1]);
      break;
    }
  }
  prof.fwhm = right - left;
  return prof;
}

void write_pgm(std::ostream& out, const Image& db_image, const std::string& provenance) {
  if (db_image.scale != Scale::db) throw std::invalid_argument("graymap export expects a dB image");
  const ImageGrid& g = db_image.grid;
  out << "P5\n# " << provenance << '\n' << g.nx << ' ' << g.nz << "\n255\n";
  std::vector<unsigned char> row(g.nx);
  for (std::size_t j = 0; j < g.nz; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      const double v = db_image.at(i, j);
      row[i] = std::isnan(v) ? 0
                             : static_cast<unsigned char>(
                                   std::lround((std::clamp(v, -60.0, 0.0) + 60.0) / 60.0 * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("failed to write image");
}

void write_profile_csv(std::ostream& out, const BeamProfile& profile,
                       const std::string& provenance) {
  out << "# " << provenance << '\n';
  out << "# fwhm_m=" << format_shortest(profile.fwhm) << '\n';
  out << "# peak_to_background_db=" << format_shortest(profile.peak_to_background_db) << '\n';
  out << "# width_level_db=-6\n";
  out << "lateral_m,value_db\n";
  for (std::size_t i = 0; i < profile.lateral_axis.size(); ++i) {
    out << format_shortest(profile.lateral_axis[i]) << ',' << format_shortest(profile.values_db[i])
        << '\n';
  }
  if (!out) throw IoError("failed to write beam profile");
}

}  // namespace goat
