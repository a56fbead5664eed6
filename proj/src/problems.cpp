#include "cycleshift/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cycleshift/errors.hpp"

namespace cycleshift {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double take(Params& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) {
    params[key] = fallback;
    return fallback;
  }
  return it->second;
}

void reject_unknown(const std::string& problem, const Params& overrides,
                    const std::vector<std::string>& known) {
  for (const auto& [key, value] : overrides) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorKind::InputDomain, "params." + key + ": unknown parameter for '" + problem + "'");
    }
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::InputDomain, "params." + key + ": must be finite", value);
    }
  }
}

Vector unit_circle_solution(double t, double eps, int dimension) {
  Vector x = Vector::Zero(dimension);
  x[0] = (1.0 + eps) * std::sin(t - std::sqrt(eps));
  x[1] = (1.0 + eps) * std::cos(t - std::sqrt(eps));
  return x;
}

ProblemDefinition circle_family(const std::string& name, double lambda, int dimension) {
  ProblemDefinition d;
  d.name = name;
  d.params["lambda"] = lambda;
  d.field = dimension == 2 ? circle_field(lambda) : circle3d_field(lambda);
  d.perturbation = [lambda, dimension](double) { return circle_shift_perturbation(lambda, dimension); };
  d.forcing_period = kTwoPi;
  d.x_guess = Vector::Zero(dimension);
  d.x_guess[1] = 1.0;
  d.period_guess = kTwoPi;
  d.exact_solution = [dimension](double t, double eps) { return unit_circle_solution(t, eps, dimension); };
  d.exact_shift = [](double eps) { return std::sqrt(eps); };
  return d;
}

}  // namespace

VectorField circle_field(double lambda) {
  VectorField f;
  f.dimension = 2;
  f.rhs = [lambda](double, const Vector& x) {
    const double s = x.squaredNorm() - 1.0;
    Vector out(2);
    out << x[1] - lambda * x[0] * s, -x[0] - lambda * x[1] * s;
    return out;
  };
  f.jacobian = [lambda](double, const Vector& x) {
    const double s = x.squaredNorm() - 1.0;
    Matrix j(2, 2);
    j << -lambda * (s + 2.0 * x[0] * x[0]), 1.0 - 2.0 * lambda * x[0] * x[1],
        -1.0 - 2.0 * lambda * x[0] * x[1], -lambda * (s + 2.0 * x[1] * x[1]);
    return j;
  };
  return f;
}

VectorField circle3d_field(double lambda) {
  const VectorField planar = circle_field(lambda);
  VectorField f;
  f.dimension = 3;
  f.rhs = [planar](double t, const Vector& x) {
    Vector out(3);
    out.head<2>() = planar.rhs(t, x.head<2>());
    out[2] = -x[2];
    return out;
  };
  f.jacobian = [planar](double t, const Vector& x) {
    Matrix j = Matrix::Zero(3, 3);
    j.topLeftCorner<2, 2>() = planar.jacobian(t, x.head<2>());
    j(2, 2) = -1.0;
    return j;
  };
  return f;
}

VectorField van_der_pol_field(double mu) {
  VectorField f;
  f.dimension = 2;
  f.rhs = [mu](double, const Vector& x) {
    Vector out(2);
    out << x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
    return out;
  };
  f.jacobian = [mu](double, const Vector& x) {
    Matrix j(2, 2);
    j << 0.0, 1.0, -2.0 * mu * x[0] * x[1] - 1.0, mu * (1.0 - x[0] * x[0]);
    return j;
  };
  return f;
}

VectorField polynomial_field(const std::vector<std::vector<Monomial>>& terms) {
  const int n = static_cast<int>(terms.size());
  if (n == 0) throw Error(ErrorKind::InputDomain, "f.polynomial: needs at least one component");
  for (int i = 0; i < n; ++i) {
    for (const auto& m : terms[i]) {
      if (static_cast<int>(m.exponents.size()) != n) {
        throw Error(ErrorKind::InputDomain, "f.polynomial[" + std::to_string(i) +
                                                "]: every term needs one exponent per component");
      }
      for (int e : m.exponents) {
        if (e < 0) throw Error(ErrorKind::InputDomain, "f.polynomial: exponents must be nonnegative", e);
      }
      if (!std::isfinite(m.coefficient)) {
        throw Error(ErrorKind::InputDomain, "f.polynomial: coefficients must be finite");
      }
    }
  }
  auto power = [](double x, int e) { return e == 0 ? 1.0 : std::pow(x, e); };
  VectorField f;
  f.dimension = n;
  f.rhs = [terms, n, power](double, const Vector& x) {
    Vector out = Vector::Zero(n);
    for (int i = 0; i < n; ++i) {
      for (const auto& m : terms[i]) {
        double v = m.coefficient;
        for (int k = 0; k < n; ++k) v *= power(x[k], m.exponents[k]);
        out[i] += v;
      }
    }
    return out;
  };
  f.jacobian = [terms, n, power](double, const Vector& x) {
    Matrix j = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (const auto& m : terms[i]) {
        for (int k = 0; k < n; ++k) {
          if (m.exponents[k] == 0) continue;
          double v = m.coefficient * m.exponents[k] * power(x[k], m.exponents[k] - 1);
          for (int l = 0; l < n; ++l) {
            if (l != k) v *= power(x[l], m.exponents[l]);
          }
          j(i, k) += v;
        }
      }
    }
    return j;
  };
  return f;
}

PerturbationFn circle_shift_perturbation(double lambda, int dimension) {
  return [lambda, dimension](double t, const Vector& x, double eps) {
    Vector out = Vector::Zero(dimension);
    out[0] = lambda * x[0] * (2.0 + eps) + (1.0 + eps) * std::sin(t - std::sqrt(eps)) - x[0];
    out[1] = lambda * x[1] * (2.0 + eps);
    return out;
  };
}

PerturbationFn cosine_forcing(double amplitude, int component, int dimension, double period) {
  if (component < 0 || component >= dimension) {
    throw Error(ErrorKind::InputDomain, "params.component: out of range", component);
  }
  if (!(period > 0.0)) throw Error(ErrorKind::InputDomain, "T: forcing period must be positive", period);
  return [amplitude, component, dimension, period](double t, const Vector&, double) {
    Vector out = Vector::Zero(dimension);
    out[component] = amplitude * std::cos(kTwoPi * t / period);
    return out;
  };
}

std::vector<std::string> registry_names() {
  return {"paper-example", "circle-soft", "circle3d", "vdp-forced"};
}

ProblemDefinition registry_problem(const std::string& name, const Params& overrides) {
  Params p = overrides;
  if (name == "paper-example") {
    reject_unknown(name, overrides, {});
    ProblemDefinition d = circle_family(name, 1.0, 2);
    d.description = "planar circle cycle, lambda = 1, with closed-form x_eps and shift sqrt(eps)";
    return d;
  }
  if (name == "circle-soft") {
    reject_unknown(name, overrides, {"lambda"});
    const double lambda = take(p, "lambda", 0.05);
    if (!(lambda > 0.0)) throw Error(ErrorKind::InputDomain, "params.lambda: must be positive", lambda);
    ProblemDefinition d = circle_family(name, lambda, 2);
    d.description = "planar circle cycle with weak contraction lambda";
    return d;
  }
  if (name == "circle3d") {
    reject_unknown(name, overrides, {"lambda"});
    const double lambda = take(p, "lambda", 1.0);
    if (!(lambda > 0.0)) throw Error(ErrorKind::InputDomain, "params.lambda: must be positive", lambda);
    ProblemDefinition d = circle_family(name, lambda, 3);
    d.description = "circle cycle times a stable linear direction x3' = -x3";
    return d;
  }
  if (name == "vdp-forced") {
    reject_unknown(name, overrides, {"mu", "amplitude"});
    const double mu = take(p, "mu", 1.0);
    const double amplitude = take(p, "amplitude", 1.0);
    if (!(mu > 0.0)) throw Error(ErrorKind::InputDomain, "params.mu: must be positive", mu);
    ProblemDefinition d;
    d.name = name;
    d.description = "van der Pol oscillator with eps amplitude cos(2 pi t / T) forcing at the cycle period";
    d.params = p;
    d.field = van_der_pol_field(mu);
    d.perturbation = [amplitude](double period) { return cosine_forcing(amplitude, 0, 2, period); };
    d.x_guess = Vector::Zero(2);
    d.x_guess[0] = 2.0;
    d.period_guess = 6.6;
    d.phase_lock = true;
    return d;
  }
  std::string known;
  for (const auto& n : registry_names()) known += (known.empty() ? "" : ", ") + n;
  throw Error(ErrorKind::InputDomain, "problem: unknown name '" + name + "' (known: " + known + ")");
}

ProblemInstance instantiate(const ProblemDefinition& definition, const CycleOptions& opts) {
  ProblemInstance out;
  out.definition = definition;
  LimitCycle cycle = find_limit_cycle(definition.field, definition.x_guess, definition.period_guess, opts);
  const double period = definition.forcing_period.value_or(cycle.period());

  PerturbedProblem& p = out.problem;
  p.name = definition.name;
  p.base = definition.field;
  p.g = definition.perturbation(period);
  p.period = period;
  p.exact_solution = definition.exact_solution;
  p.exact_shift = definition.exact_shift;

  if (definition.phase_lock) {
    const FloquetBasis basis = floquet_basis(cycle);
    out.phase_offset = phase_lock_offset(basis.periodic(), cycle, p);
    cycle = cycle.reanchored(out.phase_offset);
  }
  out.cycle = std::move(cycle);
  return out;
}

}  // namespace cycleshift
