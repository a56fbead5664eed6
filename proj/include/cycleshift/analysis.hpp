#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cycleshift/perturb.hpp"

namespace cycleshift {

enum class SolutionSource { computed, exact };

std::string to_string(SolutionSource source);
SolutionSource solution_source_from_string(const std::string& name);

struct SweepConfig {
  std::vector<double> eps;  // strictly decreasing, in (0, 1]
  SurfaceMode mode = SurfaceMode::section;
  double r0 = 0.0;          // 0 selects default_r0(cycle)
  int grid = 64;
  SolutionSource source = SolutionSource::computed;
  /// Use the problem's closed-form shift instead of solving for it.
  bool exact_shift = false;
  int threads = 1;
  ShootingOptions shooting;
  ShiftOptions shift;
};

/// Throws InputDomain naming the offending field.
void validate(const SweepConfig& config);

/// Runs `work(i)` for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& work);

/// Worker count from CYCLESHIFT_THREADS, else the hardware concurrency.
int default_thread_count();

struct SweepRecord {
  double eps = 0.0;
  bool ok = false;
  std::string error_kind;
  std::string error;
  double delta = 0.0;
  double v_norm = 0.0;
  double sup_shifted = 0.0;
  double sup_unshifted = 0.0;
  double residual_solution = 0.0;
  double residual_shift = 0.0;
  int solution_iterations = 0;
  int shift_iterations = 0;
  std::vector<std::string> warnings;
};

struct OrderFit {
  bool fitted = false;
  double p = 0.0;
  double c = 0.0;
  double residual = 0.0;  // RMS of log residuals
  int points = 0;
  std::string note;
};

/// Least squares on log d = p log eps + log c.
OrderFit fit_order(const std::vector<std::pair<double, double>>& points);

struct ConvergenceReport {
  std::string problem;
  SurfaceMode mode = SurfaceMode::section;
  SolutionSource source = SolutionSource::computed;
  bool exact_shift = false;
  double r0 = 0.0;
  int grid = 0;
  std::vector<SweepRecord> records;  // eps descending
  OrderFit shifted;
  OrderFit unshifted;
  double bound_constant = 0.0;  // max sup_shifted / eps
};

ConvergenceReport sweep(const PerturbedProblem& problem, const LimitCycle& cycle,
                        const SweepConfig& config);

enum class Verdict { pass, fail, inconclusive, inapplicable };
std::string to_string(Verdict verdict);

struct SignCheck {
  std::string eigenfunction;
  double eps = 0.0;
  double t = 0.0;
  double mperp = 0.0;
  double cosine = 0.0;
  bool skipped = false;  // |mperp| below the sign threshold
  bool agree = false;
};

struct SignReport {
  Verdict verdict = Verdict::inapplicable;
  std::vector<SignCheck> checks;
  int agreements = 0;
  int disagreements = 0;
  int skipped = 0;
  std::string note;
};

struct BoundRow {
  double eps = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

struct BoundReport {
  Verdict verdict = Verdict::inapplicable;
  std::string eigenfunction;
  std::vector<BoundRow> rows;
  std::string note;
};

struct AvoidanceRow {
  double eps = 0.0;
  double min_distance = 0.0;
  double t_min = 0.0;
};

struct AvoidanceReport {
  Verdict verdict = Verdict::inapplicable;
  std::string eigenfunction;
  std::vector<AvoidanceRow> rows;
  std::string annotation;
  std::string note;
};

struct AnchorRow {
  double eps = 0.0;
  double ratio = 0.0;  // |x_eps(delta) - x0(0)| / eps
};

/// Finite stand-in for "the anchor ratio tends to 0": strictly decreasing over
/// at least 3 points with the last below half the first, or every ratio at the
/// 1e-6 floor. Fewer points give inconclusive.
Verdict anchor_trend(const std::vector<AnchorRow>& rows, std::string* note);

struct AnchorReport {
  Verdict verdict = Verdict::inapplicable;
  std::vector<AnchorRow> rows;
  std::string note;
};

struct CosineRow {
  double eps = 0.0;
  std::string eigenfunction;
  double cosine = 0.0;
  bool defined = false;
};

struct DichotomyReport {
  std::string branch;  // nonzero-cosine, limit-zero or undetermined
  std::string eigenfunction;
  std::vector<CosineRow> rows;
  std::string note;
};

struct AngleRow {
  double eps = 0.0;
  double max_abs_cosine = 0.0;
  bool defined = false;
};

struct FailedPoint {
  double eps = 0.0;
  std::string error_kind;
  std::string error;
};

struct CorollaryReport {
  std::string problem;
  SurfaceMode mode = SurfaceMode::section;
  SolutionSource source = SolutionSource::computed;
  bool exact_shift = false;
  int grid = 0;
  std::vector<FailedPoint> failures;
  SignReport sign;            // positive/negative M-perp implies cosine sign
  BoundReport bounds;         // c1 eps <= deviation <= c2 eps
  AvoidanceReport avoidance;  // x_eps(t) never hits x0(0)
  AnchorReport anchor;        // anchor ratio tends to 0
  DichotomyReport dichotomy;
  std::vector<AngleRow> angles;
};

CorollaryReport corollary_checks(const PerturbedProblem& problem, const LimitCycle& cycle,
                                 const FloquetBasis& basis, const SweepConfig& config);

/// Continuation over the grid (largest eps first), each solve warm-started
/// from the previous success. Failures are returned as errors in place.
struct FamilyMember {
  double eps = 0.0;
  bool ok = false;
  PeriodicSolution solution;
  std::string error_kind;
  std::string error;
};

std::vector<FamilyMember> solve_family(const PerturbedProblem& problem, const LimitCycle& cycle,
                                       const SweepConfig& config);

}  // namespace cycleshift
