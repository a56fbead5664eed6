#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cycleshift {

enum class ErrorKind {
  InputDomain,
  IntegrationFailure,
  NoCycleFound,
  DegenerateOrbit,
  PeriodCollapse,
  AmbiguousCluster,
  UnsupportedSpectrum,
  NondegeneracyViolation,
  NormalizationImpossible,
  IllConditionedBasis,
  ExistenceNotEstablished,
  InvalidSurfaceMatrix,
  TransversalityFailure,
  ShiftNotFound,
  DegenerateCrossing,
  DegenerateMultiplier,
  NoPeriodicFirstVariation,
  InvalidData,
  InapplicableCorollary,
};

std::string_view to_string(ErrorKind kind);

/// Computational failure. `value` carries the kind-specific witness: the
/// last reached time for integration failures, the best residual for a
/// failed shift, the offending margin or multiplier, and so on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what,
        double value = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), kind_(kind), value_(value) {}

  ErrorKind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }

 private:
  ErrorKind kind_;
  double value_;
};

}  // namespace cycleshift
