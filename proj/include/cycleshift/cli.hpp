#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cycleshift/problems.hpp"
#include "cycleshift/report.hpp"

namespace cycleshift {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Problem definition from a config document:
///   {"name", "f": builtin name | {"polynomial": [[[c, e1, .., en], ..], ..]},
///    "g": builtin name, "T", "params", "x_guess", "T_guess", "phase_lock"}
/// Builtin f: circle, circle3d, van-der-pol. Builtin g: circle-shift, cosine.
/// Throws InputDomain naming the offending field.
ProblemDefinition problem_from_config(const Json& config);

/// `args` excludes the program name. Writes JSON to --out (stdout without it)
/// and messages to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cycleshift
