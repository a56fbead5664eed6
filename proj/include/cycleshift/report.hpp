#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

#include "cycleshift/analysis.hpp"

namespace cycleshift {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "cycleshift-report/1";
inline constexpr const char* kToolVersion = "1.0.0";

/// Scientific notation, 17 significant digits, locale independent.
/// Non-finite values have no JSON form and come back as "null".
std::string format_real(double value);

/// Pretty JSON with every float written by format_real. Arrays of scalars
/// stay on one line.
std::string dump(const Json& value);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

Json to_json(const Vector& v);
Json to_json(const Matrix& m);
Json to_json(const OrderFit& fit);
Json to_json(const SweepRecord& record);
Json to_json(const ConvergenceReport& report);
Json to_json(const CorollaryReport& report);
Json to_json(const FloquetDiagnostics& diagnostics);

/// Frozen sweep columns: eps, delta, v_norm, sup_shifted, sup_unshifted,
/// residual_solution, residual_shift, mode. Lines starting with '#' are comments.
std::string sweep_csv(const ConvergenceReport& report);

}  // namespace cycleshift
