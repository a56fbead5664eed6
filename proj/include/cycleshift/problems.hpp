#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cycleshift/perturb.hpp"

namespace cycleshift {

using Params = std::map<std::string, double>;

/// Everything needed to build a perturbed problem before its cycle is known.
struct ProblemDefinition {
  std::string name;
  std::string description;
  Params params;
  VectorField field;
  /// g for a forcing period T (the cycle period unless `forcing_period` is set).
  std::function<PerturbationFn(double period)> perturbation;
  std::optional<double> forcing_period;
  Vector x_guess;
  double period_guess = 0.0;
  /// Re-anchor the located cycle at the Malkin zero nearest 0.
  bool phase_lock = false;
  std::function<Vector(double t, double eps)> exact_solution;
  std::function<double(double eps)> exact_shift;  // section mode only
};

struct ProblemInstance {
  ProblemDefinition definition;
  PerturbedProblem problem;
  LimitCycle cycle;
  double phase_offset = 0.0;
};

std::vector<std::string> registry_names();

/// Throws InputDomain for an unknown name or parameter.
ProblemDefinition registry_problem(const std::string& name, const Params& overrides = {});

/// Locates the cycle, fixes the forcing period and applies the phase lock.
ProblemInstance instantiate(const ProblemDefinition& definition, const CycleOptions& opts = {});

/// Field from monomials: terms[i] lists (coefficient, exponents) of component i.
struct Monomial {
  double coefficient = 0.0;
  std::vector<int> exponents;
};

VectorField polynomial_field(const std::vector<std::vector<Monomial>>& terms);

VectorField circle_field(double lambda);
VectorField circle3d_field(double lambda);
VectorField van_der_pol_field(double mu);

/// (lam x1 (2+eps) + (1+eps) sin(t - sqrt eps) - x1, lam x2 (2+eps), 0, ...).
PerturbationFn circle_shift_perturbation(double lambda, int dimension);

/// amplitude cos(2 pi t / period) on one component.
PerturbationFn cosine_forcing(double amplitude, int component, int dimension, double period);

}  // namespace cycleshift
