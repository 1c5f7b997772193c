#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "goat/focusing.hpp"
#include "goat/goatsolve.hpp"
#include "goat/imaging.hpp"
#include "goat/medium.hpp"

namespace goat {

struct RoiSpec {
  Point2 center;
  double width = 4e-3;
  double height = 4e-3;
};

struct ImagingSpec {
  ImageGrid grid;
  double sample_rate = 100e6;
  std::vector<Scatterer> scatterers;
  std::vector<RoiSpec> rois;  // one per scatterer when not given explicitly
};

/// A parsed scenario; every length is in metres regardless of the file's units.
struct Scenario {
  explicit Scenario(Medium m) : medium(std::move(m)) {}

  std::string name;
  std::string sha256;  // of the file bytes
  double length_scale = 1.0;  // file length unit in metres
  Medium medium;
  std::optional<ElementArray> array;
  std::vector<Point2> sources;
  std::vector<Point2> foci;
  Pulse pulse;
  std::optional<ImagingSpec> imaging;
  FocusingOptions focusing;
  SolverOptions solver;
};

/// Parses scenario JSON. Unknown keys, missing units and invalid media raise SchemaError
/// or InvalidMediumError.
Scenario parse_scenario(const std::string& text);

/// Reads and parses a file; IoError when it cannot be read.
Scenario load_scenario(const std::string& path);

std::string sha256_hex(const std::string& bytes);

}  // namespace goat
