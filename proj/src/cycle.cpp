#include "cycleshift/cycle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cycleshift/errors.hpp"
#include "cycleshift/numerics.hpp"

namespace cycleshift {

LimitCycle::LimitCycle(VectorField field, Vector anchor, double period, double tol)
    : field_(std::move(field)), anchor_(std::move(anchor)), period_(period), tol_(tol) {
  if (!(period_ > 0.0)) throw Error(ErrorKind::InputDomain, "cycle period must be positive", period_);
  orbit_ = std::make_shared<const Trajectory>(integrate(field_, 0.0, period_, anchor_, tol_));
}

Vector LimitCycle::state(double t) const {
  const double tau = t - std::floor(t / period_) * period_;
  return (*orbit_)(std::clamp(tau, 0.0, period_));
}

Vector LimitCycle::velocity(double t) const { return field_(t, state(t)); }

LimitCycle LimitCycle::reanchored(double tau) const {
  LimitCycle out(field_, state(tau), period_, tol_);
  out.iterations_ = iterations_;
  out.residual_ = residual_;
  return out;
}

double LimitCycle::closure_defect() const { return (orbit_->back() - anchor_).norm(); }

LimitCycle find_limit_cycle(const VectorField& field, const Vector& x_guess, double period_guess,
                            const CycleOptions& opts) {
  const int n = field.dimension;
  if (x_guess.size() != n) throw Error(ErrorKind::InputDomain, "cycle guess has wrong dimension");
  if (!(period_guess > 0.0)) throw Error(ErrorKind::InputDomain, "period guess must be positive");
  const Vector phase_normal = field(0.0, x_guess);
  if (phase_normal.norm() <= opts.equilibrium_threshold) {
    throw Error(ErrorKind::DegenerateOrbit, "initial guess is an equilibrium of the field",
                phase_normal.norm());
  }

  // Bordered residual: (Omega(T,0,xi) - xi, <f(x_guess), xi - x_guess>).
  auto residual = [&](const Vector& xi, double period, SensitivityResult* sens) {
    SensitivityResult s = flow_with_sensitivity(field, period, 0.0, xi, opts.integration_tol);
    Vector r(n + 1);
    r.head(n) = s.state - xi;
    r[n] = phase_normal.dot(xi - x_guess);
    if (sens != nullptr) *sens = std::move(s);
    return r;
  };

  Vector xi = x_guess;
  double period = period_guess;
  SensitivityResult sens;
  Vector r = residual(xi, period, &sens);
  int iter = 0;
  while (r.norm() > opts.tol) {
    if (iter >= opts.max_iter) {
      std::ostringstream os;
      os << "shooting did not converge after " << opts.max_iter << " iterations (residual "
         << r.norm() << ")";
      throw Error(ErrorKind::NoCycleFound, os.str(), r.norm());
    }
    Matrix jac = Matrix::Zero(n + 1, n + 1);
    jac.topLeftCorner(n, n) = sens.sensitivity - Matrix::Identity(n, n);
    jac.topRightCorner(n, 1) = field(period, sens.state);
    jac.bottomLeftCorner(1, n) = phase_normal.transpose();
    const Vector step = jac.fullPivLu().solve(-r);
    if (!step.allFinite()) throw Error(ErrorKind::NoCycleFound, "singular shooting Jacobian");

    // Damped update: halve until the residual decreases.
    double lambda = 1.0;
    Vector xi_new;
    double period_new = period;
    Vector r_new;
    SensitivityResult sens_new;
    for (int k = 0; k < 20; ++k) {
      xi_new = xi + lambda * step.head(n);
      period_new = period + lambda * step[n];
      if (period_new < opts.min_period) {
        lambda *= 0.5;
        continue;
      }
      try {
        r_new = residual(xi_new, period_new, &sens_new);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::IntegrationFailure && e.kind() != ErrorKind::InputDomain) throw;
        lambda *= 0.5;
        continue;
      }
      if (r_new.norm() < r.norm()) break;
      lambda *= 0.5;
    }
    if (period_new < opts.min_period) {
      throw Error(ErrorKind::PeriodCollapse, "period collapsed below the minimum", period_new);
    }
    if (r_new.size() == 0) throw Error(ErrorKind::NoCycleFound, "shooting left the integrable region");
    xi = xi_new;
    period = period_new;
    r = r_new;
    sens = std::move(sens_new);
    ++iter;
  }

  if (field(0.0, xi).norm() < opts.equilibrium_threshold) {
    throw Error(ErrorKind::DegenerateOrbit, "shooting converged to an equilibrium",
                field(0.0, xi).norm());
  }
  LimitCycle cycle(field, xi, period, opts.integration_tol);
  cycle.iterations_ = iter;
  cycle.residual_ = r.norm();
  return cycle;
}

std::vector<Multiplier> cluster_eigenvalues(const Matrix& m, double cluster_tol) {
  Eigen::EigenSolver<Matrix> solver(m, false);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::InvalidData, "eigenvalue computation failed");
  std::vector<std::complex<double>> values(solver.eigenvalues().begin(), solver.eigenvalues().end());
  std::sort(values.begin(), values.end(), [](auto a, auto b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });

  std::vector<Multiplier> clusters;
  std::vector<std::complex<double>> sums;
  for (const auto& v : values) {
    bool placed = false;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const auto rep = sums[c] / static_cast<double>(clusters[c].multiplicity);
      if (std::abs(v - rep) <= cluster_tol * std::max(1.0, std::abs(rep))) {
        sums[c] += v;
        clusters[c].multiplicity += 1;
        clusters[c].value = sums[c] / static_cast<double>(clusters[c].multiplicity);
        placed = true;
        break;
      }
    }
    if (!placed) {
      clusters.push_back({v, 1});
      sums.push_back(v);
    }
  }
  return clusters;
}

MonodromyData monodromy_from_matrix(const Matrix& m, double cluster_tol) {
  MonodromyData data;
  data.matrix = m;
  data.multipliers = cluster_eigenvalues(m, cluster_tol);
  for (const auto& mult : data.multipliers) {
    if (std::abs(mult.value - 1.0) <= cluster_tol) data.unit_multiplier_multiplicity += mult.multiplicity;
  }
  return data;
}

MonodromyData monodromy(const LimitCycle& cycle, double cluster_tol) {
  const SensitivityResult s =
      flow_with_sensitivity(cycle.field(), cycle.period(), 0.0, cycle.anchor(), cycle.tolerance());
  return monodromy_from_matrix(s.sensitivity, cluster_tol);
}

NondegeneracyCert check_nondegenerate(const MonodromyData& mono, double cluster_tol) {
  NondegeneracyCert cert;
  cert.gap = std::numeric_limits<double>::infinity();
  for (const auto& mult : mono.multipliers) {
    const double dist = std::abs(mult.value - 1.0);
    if (dist <= cluster_tol) {
      cert.unit_multiplier_multiplicity += mult.multiplicity;
    } else if (dist <= 10.0 * cluster_tol) {
      std::ostringstream os;
      os << "multiplier " << mult.value << " lies " << dist
         << " from +1, inside the ambiguity band; tighten the integration tolerance";
      throw Error(ErrorKind::AmbiguousCluster, os.str(), dist);
    } else {
      cert.gap = std::min(cert.gap, dist);
    }
  }
  cert.nondegenerate = cert.unit_multiplier_multiplicity == 1;
  return cert;
}

double liouville_determinant(const LimitCycle& cycle) {
  const auto trace = [&](double s) { return cycle.field().jacobian_at(s, cycle.state(s)).trace(); };
  std::vector<double> breaks;
  const int pieces = 16;
  for (int k = 0; k <= pieces; ++k) breaks.push_back(cycle.period() * k / pieces);
  return std::exp(numerics::integrate_pieces(trace, breaks));
}

}  // namespace cycleshift
