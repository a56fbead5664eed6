#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cycleshift/floquet.hpp"

namespace cycleshift {

using PerturbationFn = std::function<Vector(double t, const Vector& x, double eps)>;

/// x' = f(x) + eps g(t, x, eps) with g T-periodic in t.
struct PerturbedProblem {
  std::string name;
  VectorField base;
  PerturbationFn g;
  double period = 0.0;
  /// Closed-form x_eps(t), when known.
  std::function<Vector(double t, double eps)> exact_solution;
  /// Closed-form shift, when known.
  std::function<double(double eps)> exact_shift;

  int dimension() const { return base.dimension; }
  Vector perturbation(double t, const Vector& x, double eps) const;
};

/// Nonautonomous field f + eps g. The Jacobian is f' plus eps times a
/// central difference of g.
VectorField perturbed_field(const PerturbedProblem& problem, double eps);

/// Largest |g(t+T, x, eps) - g(t, x, eps)| over a fixed sample of times
/// along the given states.
double periodicity_defect(const PerturbedProblem& problem, const std::vector<Vector>& states,
                          double eps);

struct ShootingOptions {
  double tol = 1e-10;
  int max_iter = 50;
  double integration_tol = kDefaultTolerance;
  double condition_cap = 1e8;
};

/// T-periodic solution of the perturbed system, evaluated with periodic
/// extension. Also used for the exact family and for the cycle itself.
class PeriodicSolution {
 public:
  PeriodicSolution() = default;

  static PeriodicSolution exact(const PerturbedProblem& problem, double eps);
  static PeriodicSolution from_cycle(const LimitCycle& cycle);

  double eps() const { return eps_; }
  double period() const { return period_; }
  const std::string& source() const { return source_; }
  Vector initial() const { return (*this)(0.0); }

  Vector operator()(double t) const;
  Vector velocity(double t) const;

  /// Shooting data (zero for exact and cycle sources).
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }
  double jacobian_condition() const { return condition_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Same solution with time origin moved to tau: s(t) = x(t + tau).
  PeriodicSolution shifted(double tau) const;

 private:
  friend PeriodicSolution find_periodic_solution(const PerturbedProblem&, double, const LimitCycle&,
                                                 const std::optional<Vector>&, const ShootingOptions&);

  double eps_ = 0.0;
  double period_ = 0.0;
  double offset_ = 0.0;
  std::string source_;
  std::function<Vector(double)> eval_;  // on [0, T)
  VectorField field_;
  double residual_ = 0.0;
  int iterations_ = 0;
  double condition_ = 0.0;
  std::vector<std::string> warnings_;
};

/// Newton shooting on Psi(T, 0, xi) - xi from warm_start, or from x0(0).
PeriodicSolution find_periodic_solution(const PerturbedProblem& problem, double eps,
                                        const LimitCycle& cycle,
                                        const std::optional<Vector>& warm_start = std::nullopt,
                                        const ShootingOptions& opts = {});

enum class SurfaceMode { section, flowed };

std::string to_string(SurfaceMode mode);
SurfaceMode surface_mode_from_string(const std::string& name);

/// Transversal surface through x0(0): S(v) = h(v) = x0(0) + A v in section
/// mode, S(v) = Omega(T, 0, h(v)) in flowed mode.
class Surface {
 public:
  Surface() = default;
  Surface(const LimitCycle& cycle, Matrix a, SurfaceMode mode);

  SurfaceMode mode() const { return mode_; }
  const Matrix& basis() const { return a_; }
  const Vector& anchor() const { return anchor_; }
  /// S'(0).
  const Matrix& tangent() const { return tangent_; }
  /// Smallest singular value of (x0'(0), S'(0)) with unit columns.
  double margin() const { return margin_; }

  Vector operator()(const Vector& v) const;
  Matrix derivative(const Vector& v) const;

 private:
  SurfaceMode mode_ = SurfaceMode::section;
  Matrix a_;
  Vector anchor_;
  double period_ = 0.0;
  double tol_ = kDefaultTolerance;
  VectorField field_;
  Matrix tangent_;
  double margin_ = 0.0;
};

inline constexpr double kTransversalityThreshold = 1e-8;

/// Orthonormal basis of the complement of x0'(0); each column has its
/// largest component positive.
Matrix default_surface_basis(const LimitCycle& cycle);

Surface build_surface(const LimitCycle& cycle, const std::optional<Matrix>& a = std::nullopt,
                      SurfaceMode mode = SurfaceMode::section,
                      double threshold = kTransversalityThreshold);

struct ShiftSolution {
  double delta = 0.0;
  Vector v;
  double residual = 0.0;
  double eps = 0.0;
  SurfaceMode mode = SurfaceMode::section;
  int iterations = 0;
  double r0 = 0.0;
};

struct ShiftOptions {
  double tol = 1e-11;
  int max_iter = 50;
};

/// 0.5 min(T/4, rho) with rho half the smallest distance between orbit points
/// at least T/4 apart in phase.
double default_r0(const LimitCycle& cycle);

/// Newton on x_eps(delta) - S(v) = 0 from (0, 0), confined to |delta| <= r0
/// and |v| <= r0.
ShiftSolution solve_shift(const PeriodicSolution& x_eps, const Surface& surface, double r0,
                          const ShiftOptions& opts = {});

/// Shift for the cycle re-anchored at x0(tau): solves x_eps(delta + tau) on
/// the surface through x0(tau).
ShiftSolution shift_for_phase(const PeriodicSolution& x_eps, const LimitCycle& cycle, double tau,
                              SurfaceMode mode, double r0, const ShiftOptions& opts = {});

struct DeviationProfile {
  double eps = 0.0;
  double delta = 0.0;
  std::vector<double> t;
  std::vector<double> d;
  double sup = 0.0;
  double sup_ratio = 0.0;  // sup / eps
};

/// d_j = |x_eps(t_j + delta) - x0(t_j)| on t_j = j T / m, j < m.
DeviationProfile shifted_deviation(const PeriodicSolution& x_eps, const LimitCycle& cycle,
                                   double delta, int m = 64);

inline constexpr double kDegenerateMultiplierThreshold = 1e-6;

/// rho / (rho - 1) times the integral over [t - T, t] of <z(s), g(s, x0(s), 0)>.
double mperp(const FloquetEntry& entry, const LimitCycle& cycle, const PerturbedProblem& problem,
             double t);

/// Integral over [0, T] of <z0(s), g(s - t, x0(s), 0)>.
double malkin(const FloquetEntry& z0, const LimitCycle& cycle, const PerturbedProblem& problem,
              double t);

/// <z(t), x_eps(t + delta) - x0(t)> / eps.
double scalar_projection(const PeriodicSolution& x_eps, double delta, const FloquetEntry& entry,
                         const LimitCycle& cycle, double t);

/// T-periodic solution of y' = f'(x0(t)) y + g(t, x0(t), 0) with the
/// x0'(0)-component of y(0) pinned to zero.
class FirstVariation {
 public:
  FirstVariation() = default;
  FirstVariation(const LimitCycle& cycle, Trajectory augmented, double residual);

  Vector operator()(double t) const;
  const Vector& initial() const { return initial_; }
  double residual() const { return residual_; }

 private:
  int n_ = 0;
  double period_ = 0.0;
  std::shared_ptr<const Trajectory> augmented_;
  Vector initial_;
  double residual_ = 0.0;
};

inline constexpr double kSolvabilityTolerance = 1e-8;

FirstVariation first_variation(const LimitCycle& cycle, const PerturbedProblem& problem,
                               const FloquetEntry& z0,
                               double solvability_tol = kSolvabilityTolerance);

/// Zero theta of the Malkin function nearest to 0 (circularly), returned in
/// (-T/2, T/2]. Re-anchoring the cycle at x0(theta) puts the perturbed
/// periodic solution near phase 0.
double phase_lock_offset(const FloquetEntry& z0, const LimitCycle& cycle,
                         const PerturbedProblem& problem, int samples = 64);

}  // namespace cycleshift
