#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cycleshift/types.hpp"

namespace cycleshift {

using RhsFn = std::function<Vector(double, const Vector&)>;
using JacobianFn = std::function<Matrix(double, const Vector&)>;

/// Right-hand side of x' = F(t, x) together with an optional Jacobian.
/// When `jacobian` is empty, a central finite-difference Jacobian is used.
struct VectorField {
  int dimension = 0;
  RhsFn rhs;
  JacobianFn jacobian;
  bool autonomous = true;

  /// Evaluates the right-hand side, checking output size and finiteness.
  Vector operator()(double t, const Vector& x) const;

  Matrix jacobian_at(double t, const Vector& x) const;
  bool has_analytic_jacobian() const { return static_cast<bool>(jacobian); }
};

/// Central finite-difference Jacobian with step max(1e-6, 1e-6*|x|).
Matrix finite_difference_jacobian(const VectorField& field, double t, const Vector& x);

/// Dense solution of an initial value problem produced by the Dormand-Prince
/// 5(4) pair. Immutable after construction; evaluation uses the fourth-order
/// continuous extension of each accepted step.
class Trajectory {
 public:
  Trajectory() = default;

  double t0() const { return t0_; }
  double t1() const { return t1_; }
  int dimension() const { return dimension_; }
  double tolerance() const { return tolerance_; }
  std::size_t steps() const { return starts_.size(); }

  /// Accepted-step grid, t0 first and t1 last.
  std::vector<double> knots() const;

  Vector operator()(double t) const;
  const Vector& front() const { return front_; }
  const Vector& back() const { return back_; }

 private:
  friend class TrajectoryBuilder;

  std::size_t segment_of(double t) const;

  int dimension_ = 0;
  double t0_ = 0.0;
  double t1_ = 0.0;
  double tolerance_ = 0.0;
  Vector front_;
  Vector back_;
  std::vector<double> starts_;
  std::vector<double> widths_;
  std::vector<Matrix> coefficients_;  // n x 5 per step
};

Trajectory integrate(const VectorField& field, double t0, double t1, const Vector& x_init,
                     double tol = kDefaultTolerance);

/// Omega(t, t0, xi): endpoint of the solution through (t0, xi).
Vector flow(const VectorField& field, double t, double t0, const Vector& xi,
            double tol = kDefaultTolerance);

struct SensitivityResult {
  Vector state;
  Matrix sensitivity;
};

/// Augmented field (x, vec(Y)) with Y' = DF(t, x) Y, column-major vec.
VectorField variational_field(const VectorField& field);

/// State and derivative of the flow with respect to the initial state, with
/// the variational equation integrated jointly with the state.
SensitivityResult flow_with_sensitivity(const VectorField& field, double t, double t0,
                                        const Vector& xi, double tol = kDefaultTolerance);

/// Dense view of a jointly integrated (state, sensitivity) solution.
class VariationalTrajectory {
 public:
  VariationalTrajectory() = default;
  VariationalTrajectory(Trajectory augmented, int dimension)
      : augmented_(std::move(augmented)), dimension_(dimension) {}

  Vector state(double t) const;
  Matrix sensitivity(double t) const;
  SensitivityResult at(double t) const;
  const Trajectory& augmented() const { return augmented_; }
  int dimension() const { return dimension_; }

 private:
  Trajectory augmented_;
  int dimension_ = 0;
};

VariationalTrajectory integrate_variational(const VectorField& field, double t0, double t1,
                                            const Vector& xi, double tol = kDefaultTolerance);

/// Splits an augmented vector (x, vec(Y)) of dimension n + n^2.
SensitivityResult split_augmented(const Vector& augmented, int n);

}  // namespace cycleshift
