#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "cycleshift/ode.hpp"

namespace cycleshift {

struct CycleOptions;

/// Periodic orbit x0 of an autonomous field, anchored at x0(0).
///
/// The orbit is stored as a dense trajectory over [0, T]; evaluation at any
/// real time uses the periodic extension.
class LimitCycle {
 public:
  LimitCycle() = default;

  /// Builds the cycle data from an anchor and a period without validating
  /// periodicity (callers that need validation go through find_limit_cycle).
  LimitCycle(VectorField field, Vector anchor, double period, double tol = kDefaultTolerance);

  const VectorField& field() const { return field_; }
  int dimension() const { return field_.dimension; }
  const Vector& anchor() const { return anchor_; }
  double period() const { return period_; }
  double tolerance() const { return tol_; }
  const Trajectory& orbit() const { return *orbit_; }

  /// x0(t), periodic extension.
  Vector state(double t) const;
  /// dx0/dt = f(x0(t)).
  Vector velocity(double t) const;

  /// Same cycle with x0(tau) as the new anchor, re-integrated.
  LimitCycle reanchored(double tau) const;

  /// Newton data when produced by find_limit_cycle.
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

  /// Closing defect |x0(T) - x0(0)| of the stored orbit.
  double closure_defect() const;

 private:
  friend LimitCycle find_limit_cycle(const VectorField&, const Vector&, double, const CycleOptions&);

  VectorField field_;
  Vector anchor_;
  double period_ = 0.0;
  double tol_ = kDefaultTolerance;
  std::shared_ptr<const Trajectory> orbit_;
  int iterations_ = 0;
  double residual_ = 0.0;
};

struct CycleOptions {
  double tol = 1e-9;                      // Newton residual target
  int max_iter = 50;
  double min_period = 1e-6;
  double equilibrium_threshold = 1e-8;    // |f| below this counts as an equilibrium
  double integration_tol = kDefaultTolerance;
};

/// Shooting with the hyperplane phase condition <f(x_guess), x - x_guess> = 0,
/// solved by Newton on the bordered system.
LimitCycle find_limit_cycle(const VectorField& field, const Vector& x_guess, double period_guess,
                            const CycleOptions& opts = {});

struct Multiplier {
  std::complex<double> value;
  int multiplicity = 1;
};

struct MonodromyData {
  Matrix matrix;                      // Y(T), Y(0) = I
  std::vector<Multiplier> multipliers;
  int unit_multiplier_multiplicity = 0;
};

inline constexpr double kDefaultClusterTol = 1e-6;

/// Eigenvalues of `m` clustered within `cluster_tol`, sorted by decreasing modulus.
std::vector<Multiplier> cluster_eigenvalues(const Matrix& m, double cluster_tol = kDefaultClusterTol);

MonodromyData monodromy(const LimitCycle& cycle, double cluster_tol = kDefaultClusterTol);

/// Monodromy data for an explicit matrix (used for cross-checks and tests).
MonodromyData monodromy_from_matrix(const Matrix& m, double cluster_tol = kDefaultClusterTol);

struct NondegeneracyCert {
  bool nondegenerate = false;
  int unit_multiplier_multiplicity = 0;
  double gap = 0.0;  // distance from the nearest other multiplier to +1
};

NondegeneracyCert check_nondegenerate(const MonodromyData& mono,
                                      double cluster_tol = kDefaultClusterTol);

/// exp of the integral of trace f'(x0(s)) over one period (Liouville).
double liouville_determinant(const LimitCycle& cycle);

}  // namespace cycleshift
