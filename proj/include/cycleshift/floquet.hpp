#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cycleshift/cycle.hpp"

namespace cycleshift {

/// Augmented adjoint field (x, vec(Z)) with x' = f(x) and Z' = -f'(x)^T Z.
/// Integrated from a point of the cycle it follows the adjoint system along
/// the cycle.
VectorField adjoint_field(const VectorField& field);

/// Z(t) = (Y(t)^T)^{-1} obtained by integrating the adjoint equation with
/// Z(0) = I along the cycle.
Matrix adjoint_fundamental(const LimitCycle& cycle, double t);

enum class Linearization { forward, adjoint };

/// Propagators of the linearization (or its adjoint) over a uniform partition
/// of [0, T]. Each segment is a dense solution of the matrix equation started
/// from the identity at its left knot.
class SegmentedPropagator {
 public:
  SegmentedPropagator(const LimitCycle& cycle, int segments, Linearization kind);

  Linearization kind() const { return kind_; }
  int size() const { return static_cast<int>(propagators_.size()); }
  double period() const { return period_; }
  double knot(int k) const { return period_ * k / size(); }
  int segment_of(double t) const;  // t in [0, T]

  /// Propagator from knot k to t, t inside segment k.
  Matrix propagator(int k, double t) const;
  const Matrix& segment_propagator(int k) const { return propagators_[k]; }

  /// Monodromy anchored at knot k.
  const Matrix& phase_monodromy(int k) const { return phase_monodromies_[k]; }

 private:
  Linearization kind_;
  int n_;
  double period_;
  std::vector<Trajectory> trajectories_;
  std::vector<Matrix> propagators_;
  std::vector<Matrix> phase_monodromies_;
};

/// Real Floquet solution z with z(t + T) = rho z(t), of the adjoint system or
/// of the linearization.
///
/// Values on [0, T] come from the stored segments; other times use the
/// Floquet relation z(t + kT) = rho^k z(t).
class FloquetEntry {
 public:
  FloquetEntry() = default;
  FloquetEntry(std::string label, double multiplier, bool periodic, std::string normalization,
               std::shared_ptr<const SegmentedPropagator> segments, std::vector<Vector> knot_values);

  const std::string& label() const { return label_; }
  double multiplier() const { return multiplier_; }
  bool periodic() const { return periodic_; }
  const std::string& normalization() const { return normalization_; }

  Vector operator()(double t) const;
  const Vector& initial() const { return knot_values_.front(); }
  /// z(t_k) at the partition knots, k = 0..K.
  const std::vector<Vector>& knot_values() const { return knot_values_; }
  const SegmentedPropagator& segments() const { return *segments_; }

  /// Same eigenfunction multiplied by c (c > 0 keeps every sign conclusion).
  FloquetEntry scaled(double c) const;

 private:
  std::string label_;
  double multiplier_ = 1.0;
  bool periodic_ = false;
  std::string normalization_;
  std::shared_ptr<const SegmentedPropagator> segments_;
  std::vector<Vector> knot_values_;
};

struct FloquetBasis {
  /// Non-periodic entries z1..z_{n-1} by decreasing multiplier, then z0.
  std::vector<FloquetEntry> entries;
  bool complete = false;
  double condition = 0.0;  // condition number of (z_i(0))
  Matrix adjoint_monodromy;

  const FloquetEntry& periodic() const;
  std::vector<FloquetEntry> non_periodic() const;
};

struct FloquetOptions {
  int segments = 64;
  double cluster_tol = kDefaultClusterTol;
  double condition_cap = 1e10;
};

FloquetBasis floquet_basis(const LimitCycle& cycle, const FloquetOptions& opts = {});

/// Real Floquet solutions y of the linearization y' = f'(x0(t)) y, each with
/// |y(0)| = 1, ordered by decreasing multiplier. Used as the spanning set in
/// the Perron check.
std::vector<FloquetEntry> forward_floquet_solutions(const LimitCycle& cycle,
                                                    const FloquetOptions& opts = {});

struct FloquetDiagnostics {
  int grid = 0;
  double perron_defect = 0.0;           // drift of <z_i, y_j>, scaled by the larger |z_i||y_j|
  double orthogonality_defect = 0.0;    // max |<x0', z_i>| / (|x0'||z_i|), z_i non-periodic
  double dual_basis_defect = 0.0;       // last column of W^{-T} against x0'
  double floquet_relation_defect = 0.0; // backward error of M_k z(t_k) = rho z(t_k)
  double closure_defect = 0.0;          // |z(T) - rho z(0)| / |rho z(0)|
  double basis_condition = 0.0;
};

FloquetDiagnostics floquet_diagnostics(const FloquetBasis& basis, const LimitCycle& cycle,
                                       int grid = 64);

}  // namespace cycleshift
