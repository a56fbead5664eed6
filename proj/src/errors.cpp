#include "cycleshift/errors.hpp"

namespace cycleshift {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InputDomain: return "input-domain";
    case ErrorKind::IntegrationFailure: return "integration-failure";
    case ErrorKind::NoCycleFound: return "no-cycle-found";
    case ErrorKind::DegenerateOrbit: return "degenerate-orbit";
    case ErrorKind::PeriodCollapse: return "period-collapse";
    case ErrorKind::AmbiguousCluster: return "ambiguous-cluster";
    case ErrorKind::UnsupportedSpectrum: return "unsupported-spectrum";
    case ErrorKind::NondegeneracyViolation: return "nondegeneracy-violation";
    case ErrorKind::NormalizationImpossible: return "normalization-impossible";
    case ErrorKind::IllConditionedBasis: return "ill-conditioned-basis";
    case ErrorKind::ExistenceNotEstablished: return "existence-not-established";
    case ErrorKind::InvalidSurfaceMatrix: return "invalid-A";
    case ErrorKind::TransversalityFailure: return "transversality-failure";
    case ErrorKind::ShiftNotFound: return "shift-not-found";
    case ErrorKind::DegenerateCrossing: return "degenerate-crossing";
    case ErrorKind::DegenerateMultiplier: return "degenerate-multiplier";
    case ErrorKind::NoPeriodicFirstVariation: return "no-periodic-first-variation";
    case ErrorKind::InvalidData: return "invalid-data";
    case ErrorKind::InapplicableCorollary: return "inapplicable-corollary";
  }
  return "unknown";
}

}  // namespace cycleshift
