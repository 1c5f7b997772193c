#include "goat/scenario.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "goat/errors.hpp"
#include "json.hpp"

namespace goat {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> required,
                  std::initializer_list<const char*> optional = {}) {
  if (!obj.is_object()) throw SchemaError(where + " must be an object");
  std::set<std::string> allowed;
  for (const char* k : required) {
    allowed.insert(k);
    if (!obj.contains(k)) throw SchemaError(where + ": missing key '" + k + "'");
  }
  for (const char* k : optional) allowed.insert(k);
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw SchemaError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(where + " must be finite");
  return d;
}

std::size_t count(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw SchemaError(where + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v.get<long long>());
}

std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) throw SchemaError(where + " must be a string");
  return v.get<std::string>();
}

const json& array_of(const json& v, const std::string& where, std::size_t n = 0) {
  if (!v.is_array()) throw SchemaError(where + " must be an array");
  if (n != 0 && v.size() != n) {
    throw SchemaError(where + " must have " + std::to_string(n) + " entries");
  }
  return v;
}

Point2 point(const json& v, const std::string& where, double scale) {
  array_of(v, where, 2);
  return {number(v[0], where + "[0]") * scale, number(v[1], where + "[1]") * scale};
}

std::vector<Point2> points(const json& v, const std::string& where, double scale) {
  std::vector<Point2> out;
  for (std::size_t i = 0; i < array_of(v, where).size(); ++i) {
    out.push_back(point(v[i], where + "[" + std::to_string(i) + "]", scale));
  }
  return out;
}

Interval interval(const json& v, const std::string& where, double scale) {
  array_of(v, where, 2);
  const Interval r{number(v[0], where + "[0]") * scale, number(v[1], where + "[1]") * scale};
  if (!(r.lo < r.hi)) throw SchemaError(where + " must be increasing");
  return r;
}

BoundaryCurve boundary(const json& b, const std::string& where, double scale, Interval domain) {
  if (!b.is_object() || !b.contains("kind")) throw SchemaError(where + ": missing key 'kind'");
  const std::string kind = text(b["kind"], where + ".kind");
  if (kind == "constant") {
    require_keys(b, where, {"kind", "depth"});
    return BoundaryCurve::constant(number(b["depth"], where + ".depth") * scale, domain);
  }
  if (kind == "linear") {
    require_keys(b, where, {"kind", "slope", "offset"});
    return BoundaryCurve::linear(number(b["slope"], where + ".slope"),
                                 number(b["offset"], where + ".offset") * scale, domain);
  }
  if (kind == "ellipse") {
    require_keys(b, where, {"kind", "semi_lateral", "semi_depth", "center", "sign"});
    const double sign = number(b["sign"], where + ".sign");
    if (sign != 1.0 && sign != -1.0) throw SchemaError(where + ".sign must be 1 or -1");
    const double a = number(b["semi_lateral"], where + ".semi_lateral") * scale;
    const double bb = number(b["semi_depth"], where + ".semi_depth") * scale;
    if (!(a > 0.0) || !(bb > 0.0)) throw SchemaError(where + ": semi-axes must be positive");
    return BoundaryCurve::ellipse(a, bb, point(b["center"], where + ".center", scale),
                                  static_cast<int>(sign), domain);
  }
  if (kind == "sampled") {
    require_keys(b, where, {"kind", "x", "z"});
    std::vector<double> xs;
    std::vector<double> zs;
    for (const json& v : array_of(b["x"], where + ".x")) xs.push_back(number(v, where + ".x") * scale);
    for (const json& v : array_of(b["z"], where + ".z")) zs.push_back(number(v, where + ".z") * scale);
    if (xs.size() != zs.size() || xs.size() < 3) {
      throw SchemaError(where + ": x and z need equal length of at least 3");
    }
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (!(xs[i] > xs[i - 1])) throw SchemaError(where + ".x must be strictly increasing");
    }
    if (xs.front() > domain.lo || xs.back() < domain.hi) {
      throw SchemaError(where + ": knots must cover the medium domain");
    }
    return BoundaryCurve::sampled(std::move(xs), std::move(zs));
  }
  throw SchemaError(where + ": unknown boundary kind '" + kind + "'");
}

Medium medium(const json& m, double scale) {
  require_keys(m, "medium", {"domain", "speeds", "boundaries"});
  const Interval domain = interval(m["domain"], "medium.domain", scale);
  std::vector<double> speeds;
  for (const json& v : array_of(m["speeds"], "medium.speeds")) {
    speeds.push_back(number(v, "medium.speeds"));
  }
  std::vector<BoundaryCurve> curves;
  const json& bs = array_of(m["boundaries"], "medium.boundaries");
  for (std::size_t i = 0; i < bs.size(); ++i) {
    curves.push_back(boundary(bs[i], "medium.boundaries[" + std::to_string(i) + "]", scale, domain));
  }
  return make_validated_medium(std::move(speeds), std::move(curves), domain);
}

SolverOptions solver(const json& s) {
  require_keys(s, "solver", {},
               {"tol_residual", "max_newton_iters", "max_backtracks", "bisection_fallback"});
  SolverOptions o;
  if (s.contains("tol_residual")) {
    o.tol_residual = number(s["tol_residual"], "solver.tol_residual");
    if (!(o.tol_residual > 0.0)) throw SchemaError("solver.tol_residual must be positive");
  }
  if (s.contains("max_newton_iters")) {
    o.max_newton_iters = static_cast<int>(count(s["max_newton_iters"], "solver.max_newton_iters"));
  }
  if (s.contains("max_backtracks")) {
    o.max_backtracks = static_cast<int>(count(s["max_backtracks"], "solver.max_backtracks"));
  }
  if (s.contains("bisection_fallback")) {
    if (!s["bisection_fallback"].is_boolean()) {
      throw SchemaError("solver.bisection_fallback must be a boolean");
    }
    o.bisection_fallback = s["bisection_fallback"].get<bool>();
  }
  return o;
}

ImagingSpec imaging(const json& im, double scale) {
  require_keys(im, "imaging", {"x", "z", "spacing", "scatterers"}, {"sample_rate_hz", "rois"});
  const Interval x = interval(im["x"], "imaging.x", scale);
  const Interval z = interval(im["z"], "imaging.z", scale);
  const double spacing = number(im["spacing"], "imaging.spacing") * scale;
  if (!(spacing > 0.0)) throw SchemaError("imaging.spacing must be positive");

  ImagingSpec spec;
  spec.grid = ImageGrid::covering(x.lo, x.hi, z.lo, z.hi, spacing);
  if (im.contains("sample_rate_hz")) {
    spec.sample_rate = number(im["sample_rate_hz"], "imaging.sample_rate_hz");
  }
  const json& sc = array_of(im["scatterers"], "imaging.scatterers");
  for (std::size_t i = 0; i < sc.size(); ++i) {
    const std::string where = "imaging.scatterers[" + std::to_string(i) + "]";
    require_keys(sc[i], where, {"position"}, {"amplitude"});
    Scatterer s;
    s.position = point(sc[i]["position"], where + ".position", scale);
    if (sc[i].contains("amplitude")) s.amplitude = number(sc[i]["amplitude"], where + ".amplitude");
    spec.scatterers.push_back(s);
  }
  if (im.contains("rois")) {
    const json& rs = array_of(im["rois"], "imaging.rois");
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const std::string where = "imaging.rois[" + std::to_string(i) + "]";
      require_keys(rs[i], where, {"center"}, {"width", "height"});
      RoiSpec r;
      r.center = point(rs[i]["center"], where + ".center", scale);
      if (rs[i].contains("width")) r.width = number(rs[i]["width"], where + ".width") * scale;
      if (rs[i].contains("height")) r.height = number(rs[i]["height"], where + ".height") * scale;
      if (!(r.width > 0.0) || !(r.height > 0.0)) throw SchemaError(where + ": empty roi");
      spec.rois.push_back(r);
    }
  } else {
    for (const Scatterer& s : spec.scatterers) spec.rois.push_back({s.position});
  }
  return spec;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

Scenario parse_scenario(const std::string& text_in) {
  json doc;
  try {
    doc = json::parse(text_in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what());
  }
  require_keys(doc, "scenario", {"name", "units", "medium"},
               {"description", "array", "sources", "foci", "pulse", "imaging", "focusing",
                "solver"});

  require_keys(doc["units"], "units", {"length", "speed"});
  const std::string length = text(doc["units"]["length"], "units.length");
  const std::string speed = text(doc["units"]["speed"], "units.speed");
  double scale = 0.0;
  if (length == "mm") {
    scale = 1e-3;
  } else if (length == "m") {
    scale = 1.0;
  } else {
    throw SchemaError("units.length must be 'mm' or 'm'");
  }
  if (speed != "m/s") throw SchemaError("units.speed must be 'm/s'");
  if (doc.contains("description")) text(doc["description"], "description");

  Scenario s(medium(doc["medium"], scale));
  s.name = text(doc["name"], "name");
  s.sha256 = sha256_hex(text_in);
  s.length_scale = scale;

  if (doc.contains("array")) {
    const json& a = doc["array"];
    require_keys(a, "array", {"elements", "pitch"}, {"z", "x_center"});
    const double pitch = number(a["pitch"], "array.pitch") * scale;
    if (!(pitch > 0.0)) throw SchemaError("array.pitch must be positive");
    const double z = a.contains("z") ? number(a["z"], "array.z") * scale : 0.0;
    const double xc = a.contains("x_center") ? number(a["x_center"], "array.x_center") * scale : 0.0;
    s.array = ElementArray::linear(count(a["elements"], "array.elements"), pitch, z, xc);
    validate_array(*s.array);
  }
  if (doc.contains("sources")) s.sources = points(doc["sources"], "sources", scale);
  if (doc.contains("foci")) s.foci = points(doc["foci"], "foci", scale);
  if (doc.contains("pulse")) {
    const json& p = doc["pulse"];
    require_keys(p, "pulse", {}, {"center_frequency_hz", "fractional_bandwidth"});
    if (p.contains("center_frequency_hz")) {
      s.pulse.center_frequency = number(p["center_frequency_hz"], "pulse.center_frequency_hz");
    }
    if (p.contains("fractional_bandwidth")) {
      s.pulse.fractional_bandwidth = number(p["fractional_bandwidth"], "pulse.fractional_bandwidth");
    }
    validate_pulse(s.pulse);
  }
  if (doc.contains("solver")) s.solver = solver(doc["solver"]);
  s.focusing.solver = s.solver;
  if (doc.contains("focusing")) {
    const json& f = doc["focusing"];
    require_keys(f, "focusing", {}, {"reference_speed", "transmit_element"});
    if (f.contains("reference_speed")) {
      s.focusing.reference_speed = number(f["reference_speed"], "focusing.reference_speed");
      if (!(s.focusing.reference_speed > 0.0)) {
        throw SchemaError("focusing.reference_speed must be positive");
      }
    }
    if (f.contains("transmit_element")) {
      s.focusing.transmit_element = count(f["transmit_element"], "focusing.transmit_element");
      if (s.array && *s.focusing.transmit_element >= s.array->size()) {
        throw SchemaError("focusing.transmit_element out of range");
      }
    }
  }
  if (doc.contains("imaging")) s.imaging = imaging(doc["imaging"], scale);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scenario '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("cannot read scenario '" + path + "'");
  return parse_scenario(buf.str());
}

}  // namespace goat
