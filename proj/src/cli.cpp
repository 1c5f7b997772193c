#include "goat/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <tbb/global_control.h>

#include "CLI11.hpp"
#include "goat/analysis.hpp"
#include "goat/errors.hpp"
#include "goat/focusing.hpp"
#include "goat/goatsolve.hpp"
#include "goat/imaging.hpp"
#include "json.hpp"

namespace goat::cli {

namespace {

using json = nlohmann::ordered_json;

struct Flags {
  std::string scenario;
  std::string engine = "goat";
  std::string kind = "receive";
  std::string source;
  std::string focus;
  std::string seed_point;
  std::string out;
  std::size_t grid = 0;
  std::size_t threads = 0;
  std::uint64_t seed = 0;
};

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw SchemaError("not a number: '" + s + "'");
  }
  return v;
}

/// "i" selects list[i]; "x,z" is a point in the scenario's length unit.
Point2 select_point(const std::string& arg, const std::vector<Point2>& list, const Scenario& sc,
                    const char* what) {
  if (arg.empty()) {
    if (list.empty()) throw SchemaError(std::string("scenario has no ") + what + "; pass one");
    return list.front();
  }
  const auto comma = arg.find(',');
  if (comma == std::string::npos) {
    std::size_t i = 0;
    const auto res = std::from_chars(arg.data(), arg.data() + arg.size(), i);
    if (res.ec != std::errc() || res.ptr != arg.data() + arg.size()) {
      throw SchemaError(std::string("bad ") + what + " selector '" + arg + "'");
    }
    if (i >= list.size()) throw SchemaError(std::string(what) + " index out of range");
    return list[i];
  }
  return {parse_double(arg.substr(0, comma)) * sc.length_scale,
          parse_double(arg.substr(comma + 1)) * sc.length_scale};
}

Engine parse_engine(const std::string& s) {
  if (s == "goat") return Engine::goat;
  if (s == "hmfa") return Engine::hmfa;
  throw SchemaError("engine must be 'hmfa' or 'goat'");
}

json provenance_json(const Scenario& sc) {
  return {{"tool", kToolName}, {"version", kToolVersion}, {"scenario", sc.name},
          {"scenario_sha256", sc.sha256}};
}

json pt(Point2 p) { return json::array({p.x, p.z}); }

/// Medium seen by a target: layers above and including the target's layer.
Medium medium_for(const Medium& m, Point2 target) {
  const std::size_t layer = m.layer_of(target);
  if (layer + 1 == m.layer_count()) return m;
  if (layer == 0) throw DomainError("target lies in the first layer; no boundary to cross");
  return m.truncated(layer + 1);
}

void emit(const json& report, const Flags& f, std::ostream& out) {
  const std::string text = report.dump(2) + "\n";
  if (f.out.empty()) {
    out << text;
    return;
  }
  std::ofstream file(f.out, std::ios::binary);
  file << text;
  if (!file) throw IoError("cannot write '" + f.out + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  return file;
}

json solution_json(const GoatSolution& s) {
  json j;
  j["xs_m"] = s.xs;
  json points = json::array();
  for (const Point2& p : s.path.points) points.push_back(pt(p));
  j["points_m"] = points;
  j["incidence_angles_rad"] = s.path.incidence_angles;
  j["refraction_angles_rad"] = s.path.refraction_angles;
  j["tof_per_layer_s"] = s.path.tof_per_layer;
  j["tof_s"] = s.tof;
  j["iterations"] = s.iterations;
  j["residual_norm"] = s.residual_norm;
  j["method"] = to_string(s.method);
  j["multiple_roots"] = s.multiple_roots;
  return j;
}

json report_json(const ConditionReport& r) {
  json j;
  j["condition"] = to_string(r.condition);
  j["boundary"] = r.boundary_index;
  j["satisfied"] = r.satisfied;
  j["margin"] = r.margin;
  if (r.witness) j["witness_m"] = pt(*r.witness);
  if (r.witness_interval) j["witness_interval_m"] = {r.witness_interval->lo, r.witness_interval->hi};
  if (!r.witness_xs.empty()) j["witness_xs_m"] = r.witness_xs;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

int cmd_solve(const Scenario& sc, const Flags& f, std::ostream& out) {
  const Point2 p0 = select_point(f.source, sc.sources, sc, "sources");
  const Point2 pN = select_point(f.focus, sc.foci, sc, "foci");
  const TofEngine engine(sc.medium, sc.solver);
  const GoatSolution s = engine.solution(p0, pN);
  json r;
  r["provenance"] = provenance_json(sc);
  r["command"] = "solve";
  r["source_m"] = pt(p0);
  r["focus_m"] = pt(pN);
  r["solution"] = solution_json(s);
  emit(r, f, out);
  return 0;
}

int cmd_delays(const Scenario& sc, const Flags& f, std::ostream& out) {
  if (!sc.array) throw SchemaError("scenario has no array");
  DelayKind kind;
  if (f.kind == "receive") {
    kind = DelayKind::receive;
  } else if (f.kind == "transmit") {
    kind = DelayKind::transmit;
  } else {
    throw SchemaError("kind must be 'transmit' or 'receive'");
  }
  const DelayTable table =
      build_delay_table(*sc.array, sc.foci, sc.medium, parse_engine(f.engine), kind, sc.focusing);
  if (f.out.empty()) {
    write_delay_csv(out, table, provenance(sc));
  } else {
    std::ofstream file = open_out(f.out);
    write_delay_csv(file, table, provenance(sc));
  }
  return 0;
}

int cmd_check(const Scenario& sc, const Flags& f, std::ostream& out) {
  const Point2 p0 = select_point(f.source, sc.sources, sc, "sources");
  const Point2 pN = select_point(f.focus, sc.foci, sc, "foci");
  const Medium m = medium_for(sc.medium, pN);

  json r;
  r["provenance"] = provenance_json(sc);
  r["command"] = "check";
  r["source_m"] = pt(p0);
  r["focus_m"] = pt(pN);
  json conditions = json::array();

  conditions.push_back(report_json(check_bracket(m, p0, pN)));

  std::vector<Point2> path;
  try {
    path = solve(m, p0, pN, sc.solver).path.points;
    r["path"] = "solution";
  } catch (const Error& e) {
    r["solve_error"] = {{"kind", e.kind()}, {"message", e.what()}};
    const std::vector<double> xs = initial_guess_straight(m, p0, pN);
    path.push_back(p0);
    for (std::size_t i = 0; i < xs.size(); ++i) path.push_back({xs[i], m.boundary(i).eval(xs[i])});
    path.push_back(pN);
    r["path"] = "straight";
  }
  json points = json::array();
  for (const Point2& p : path) points.push_back(pt(p));
  r["path_points_m"] = points;

  for (const ConditionReport& c : check_no_total_reflection(m, path)) {
    conditions.push_back(report_json(c));
  }
  for (std::size_t i = 0; i < m.boundary_count(); ++i) {
    conditions.push_back(report_json(check_unique_intersection(
        m, i, path[i + 1], path[i + 2], ray_slope(path[i + 1], path[i + 2]))));
  }
  if (m.layer_count() == 2) conditions.push_back(report_json(uniqueness_scan(m, p0, pN)));

  bool all = true;
  for (const auto& c : conditions) all = all && c["satisfied"].get<bool>();
  r["conditions"] = conditions;
  r["all_satisfied"] = all;
  emit(r, f, out);
  return 0;
}

int cmd_levelset(const Scenario& sc, const Flags& f, std::ostream& out) {
  const Point2 p0 = select_point(f.source, sc.sources, sc, "sources");
  const Point2 pN = select_point(f.focus, sc.foci, sc, "foci");
  const Medium m = medium_for(sc.medium, pN);
  if (m.layer_count() != 2) throw SchemaError("level sets need a two-layer path");
  Point2 seed;
  if (f.seed_point.empty()) {
    seed = solve(m, p0, pN, sc.solver).path.points[1];
  } else {
    seed = select_point(f.seed_point, {}, sc, "seed point");
  }
  if (!(seed.z > std::min(p0.z, pN.z) && seed.z < std::max(p0.z, pN.z))) {
    throw SchemaError("seed must lie strictly between source and focus in depth");
  }
  const LevelSetCurve curve =
      tof_level_set(m, p0, pN, seed, f.grid == 0 ? kDefaultArcSteps : f.grid);
  const std::vector<double> res = oval_residuals(m, p0, pN, curve);

  std::ostringstream csv;
  csv << "# " << provenance(sc) << '\n';
  csv << "# tof_s=" << format_shortest(curve.tof_value) << '\n';
  csv << "# seed_m=" << format_shortest(seed.x) << ',' << format_shortest(seed.z) << '\n';
  csv << "# truncated=" << (curve.truncated ? 1 : 0) << '\n';
  csv << "x_m,z_m,oval_residual_m\n";
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    csv << format_shortest(curve.points[i].x) << ',' << format_shortest(curve.points[i].z) << ','
        << format_shortest(res[i]) << '\n';
  }
  if (f.out.empty()) {
    out << csv.str();
  } else {
    std::ofstream file = open_out(f.out);
    file << csv.str();
    if (!file) throw IoError("cannot write '" + f.out + "'");
  }
  return 0;
}

int cmd_oracle(const Scenario& sc, const Flags& f, std::ostream& out) {
  const Point2 p0 = select_point(f.source, sc.sources, sc, "sources");
  const Point2 pN = select_point(f.focus, sc.foci, sc, "foci");
  const Medium m = medium_for(sc.medium, pN);
  const std::size_t grid = f.grid == 0 ? 4096 : f.grid;
  if (grid < 64) throw SchemaError("grid must be at least 64");
  const GoatSolution s = solve(m, p0, pN, sc.solver);
  const OracleResult o = fermat_oracle(m, p0, pN, grid, 60);
  const double diff = s.tof - o.tof;
  const double tolerance = std::max(o.bound, 1e-9 * s.tof);

  json r;
  r["provenance"] = provenance_json(sc);
  r["command"] = "oracle";
  r["source_m"] = pt(p0);
  r["focus_m"] = pt(pN);
  r["grid"] = grid;
  r["goat_tof_s"] = s.tof;
  r["goat_xs_m"] = s.xs;
  r["goat_method"] = to_string(s.method);
  r["oracle_tof_s"] = o.tof;
  r["oracle_dp_tof_s"] = o.dp_tof;
  r["oracle_xs_m"] = o.xs;
  r["difference_s"] = diff;
  r["oracle_bound_s"] = o.bound;
  r["tolerance_s"] = tolerance;
  r["pass"] = std::abs(diff) <= tolerance;
  emit(r, f, out);
  return 0;
}

double record_duration(const Scenario& sc, const ImagingSpec& im) {
  double far = 0.0;
  for (const Point2& e : sc.array->positions) {
    for (const Scatterer& s : im.scatterers) far = std::max(far, distance(e, s.position));
  }
  const auto& c = sc.medium.speeds();
  const double c_min = *std::min_element(c.begin(), c.end());
  // The refracted ToF never exceeds the chord's, which is at most far / c_min.
  return 2.0 * far / c_min + 2.0 * sc.pulse.half_support();
}

ChannelDataSet channels_for(const Scenario& sc, const ImagingSpec& im, const std::string& path,
                            const std::string& prov, bool* cached) {
  {
    std::ifstream in(path, std::ios::binary);
    if (in) {
      try {
        std::string stored;
        ChannelDataSet ch = read_channels(in, &stored);
        if (stored == prov) {
          *cached = true;
          return ch;
        }
      } catch (const IoError&) {
      }
    }
  }
  *cached = false;
  ChannelDataSet ch = synthesize_channels(sc.medium, *sc.array, im.scatterers, sc.pulse,
                                          im.sample_rate, record_duration(sc, im), sc.solver);
  std::ofstream file = open_out(path);
  write_channels(file, ch, prov);
  // Reload so cached and fresh runs beamform identical float32 data.
  file.close();
  std::ifstream in(path, std::ios::binary);
  return read_channels(in);
}

int cmd_beamform(const Scenario& sc, const Flags& f, std::ostream& out) {
  if (!sc.array) throw SchemaError("scenario has no array");
  if (!sc.imaging) throw SchemaError("scenario has no imaging block");
  if (f.out.empty()) throw SchemaError("beamform needs --out <prefix>");
  const ImagingSpec& im = *sc.imaging;
  const Engine engine = parse_engine(f.engine);
  const std::string prov = provenance(sc);
  const std::filesystem::path prefix(f.out);
  const std::string base = prefix.filename().string();
  auto artifact = [&](const std::string& suffix) {
    return std::filesystem::path(f.out + suffix);
  };

  bool cached = false;
  const ChannelDataSet ch = channels_for(sc, im, artifact(".channels.bin").string(), prov, &cached);

  BeamformOptions opts;
  opts.focusing = sc.focusing;
  opts.center_frequency = sc.pulse.center_frequency;
  const Image linear = das_beamform(ch, sc.medium, *sc.array, im.grid, engine, opts);
  const Image db = to_db(linear);
  {
    std::ofstream file = open_out(artifact(".pgm").string());
    write_pgm(file, db, prov);
  }

  json meta;
  meta["provenance"] = provenance_json(sc);
  meta["command"] = "beamform";
  meta["engine"] = to_string(engine);
  meta["scale"] = "db";
  meta["db_range"] = {-60.0, 0.0};
  meta["image"] = base + ".pgm";
  meta["channels"] = base + ".channels.bin";
  const ImageGrid& g = im.grid;
  meta["grid"] = {{"x0_m", g.x0}, {"z0_m", g.z0}, {"dx_m", g.dx}, {"dz_m", g.dz},
                  {"nx", g.nx},   {"nz", g.nz}};
  meta["extents_m"] = {{"x", {g.x(0), g.x(g.nx - 1)}}, {"z", {g.z(0), g.z(g.nz - 1)}}};
  meta["sample_rate_hz"] = ch.sample_rate;
  meta["pulse"] = {{"center_frequency_hz", sc.pulse.center_frequency},
                   {"fractional_bandwidth", sc.pulse.fractional_bandwidth}};
  meta["omitted_contributions"] = ch.omitted.size();
  meta["width_level_db"] = -6.0;

  json rois = json::array();
  for (std::size_t k = 0; k < im.rois.size(); ++k) {
    const RoiSpec& spec = im.rois[k];
    json rj;
    rj["center_m"] = pt(spec.center);
    rj["width_m"] = spec.width;
    rj["height_m"] = spec.height;
    try {
      const BeamProfile p = beam_profile(linear, Roi::centered(spec.center, spec.width, spec.height));
      const std::string name = base + ".roi" + std::to_string(k) + ".csv";
      std::ofstream file = open_out(artifact(".roi" + std::to_string(k) + ".csv").string());
      write_profile_csv(file, p, prov);
      rj["profile"] = name;
      rj["fwhm_m"] = p.fwhm;
      rj["peak_to_background_db"] = p.peak_to_background_db;
      rj["peak_m"] = pt(p.peak);
    } catch (const RoiError& e) {
      rj["error"] = {{"kind", e.kind()}, {"message", e.what()}};
    }
    rois.push_back(rj);
  }
  meta["rois"] = rois;
  {
    std::ofstream file = open_out(artifact(".json").string());
    file << meta.dump(2) << '\n';
    if (!file) throw IoError("cannot write image metadata");
  }
  out << meta.dump(2) << '\n';
  return 0;
}

void report_error(std::ostream& err, const char* kind, int family, const std::string& message,
                  const json& extra = {}) {
  json j;
  j["error"] = {{"kind", kind}, {"exit_code", family}, {"message", message}};
  for (const auto& item : extra.items()) j["error"][item.key()] = item.value();
  err << j.dump() << '\n';
}

}  // namespace

std::string provenance(const Scenario& scenario) {
  return std::string(kToolName) + " " + kToolVersion + " scenario_sha256=" + scenario.sha256;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Refraction-corrected times of flight and focusing delays", kToolName};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", f.scenario, "Scenario JSON file")->required();
    sub->add_option("--out", f.out, "Output path (prefix for beamform)");
    sub->add_option("--threads", f.threads, "Worker threads (0: all cores)");
    sub->add_option("--seed", f.seed, "Seed for randomized generators");
  };
  auto endpoints = [&](CLI::App* sub) {
    sub->add_option("--source", f.source, "Source index or x,z in scenario length units");
    sub->add_option("--focus", f.focus, "Focus index or x,z in scenario length units");
  };

  CLI::App* solve_cmd = app.add_subcommand("solve", "Solve one source-focus path");
  common(solve_cmd);
  endpoints(solve_cmd);
  CLI::App* delays_cmd = app.add_subcommand("delays", "Write a focusing delay table as CSV");
  common(delays_cmd);
  delays_cmd->add_option("--engine", f.engine, "hmfa or goat");
  delays_cmd->add_option("--kind", f.kind, "transmit or receive");
  CLI::App* check_cmd = app.add_subcommand("check", "Report existence and uniqueness conditions");
  common(check_cmd);
  endpoints(check_cmd);
  CLI::App* level_cmd = app.add_subcommand("levelset", "Trace a ToF level set as CSV");
  common(level_cmd);
  endpoints(level_cmd);
  level_cmd->add_option("--seed-point", f.seed_point, "x,z in scenario length units");
  level_cmd->add_option("--grid", f.grid, "Integration steps across the domain");
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "Compare against the Fermat oracle");
  common(oracle_cmd);
  endpoints(oracle_cmd);
  oracle_cmd->add_option("--grid", f.grid, "Oracle grid points per boundary");
  CLI::App* beam_cmd = app.add_subcommand("beamform", "Synthesize, beamform and profile");
  common(beam_cmd);
  beam_cmd->add_option("--engine", f.engine, "hmfa or goat");

  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorFamily::schema);
  }

  std::unique_ptr<tbb::global_control> limit;
  if (f.threads > 0) {
    limit = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism,
                                                  f.threads);
  }

  try {
    const Scenario sc = load_scenario(f.scenario);
    if (*solve_cmd) return cmd_solve(sc, f, out);
    if (*delays_cmd) return cmd_delays(sc, f, out);
    if (*check_cmd) return cmd_check(sc, f, out);
    if (*level_cmd) return cmd_levelset(sc, f, out);
    if (*oracle_cmd) return cmd_oracle(sc, f, out);
    return cmd_beamform(sc, f, out);
  } catch (const TotalReflectionError& e) {
    json extra;
    if (e.boundary()) extra["boundary"] = *e.boundary();
    extra["sine_ratio"] = e.sine_ratio();
    report_error(err, e.kind(), static_cast<int>(e.family()), e.what(), extra);
    return static_cast<int>(e.family());
  } catch (const NonConvergenceError& e) {
    json extra;
    extra["best_xs_m"] = e.best_xs();
    extra["best_residual"] = e.best_residual();
    report_error(err, e.kind(), static_cast<int>(e.family()), e.what(), extra);
    return static_cast<int>(e.family());
  } catch (const Error& e) {
    report_error(err, e.kind(), static_cast<int>(e.family()), e.what());
    return static_cast<int>(e.family());
  } catch (const std::invalid_argument& e) {
    report_error(err, "InvalidArgument", static_cast<int>(ErrorFamily::schema), e.what());
    return static_cast<int>(ErrorFamily::schema);
  }
}

}  // namespace goat::cli
