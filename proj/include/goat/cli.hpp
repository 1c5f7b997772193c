#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "goat/scenario.hpp"

namespace goat::cli {

inline constexpr const char* kToolName = "goatfocus";
inline constexpr const char* kToolVersion = "1.0.0";

/// "goatfocus 1.0.0 scenario_sha256=<hex>"
std::string provenance(const Scenario& scenario);

/// Runs one command line (args[0] is the program name). Returns the process exit code;
/// reports go to `out`, machine-readable errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace goat::cli
