#include "cycleshift/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "cycleshift/errors.hpp"
#include "cycleshift/numerics.hpp"

namespace cycleshift {

namespace {

double wrap(double t, double period) {
  const double tau = t - std::floor(t / period) * period;
  return std::clamp(tau, 0.0, period);
}

double smallest_singular_value(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()[svd.singularValues().size() - 1];
}

double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s[s.size() - 1] == 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / s[s.size() - 1];
}

Matrix unit_columns(Matrix m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double nrm = m.col(j).norm();
    if (nrm > 0.0) m.col(j) /= nrm;
  }
  return m;
}

/// Breakpoints covering [a, b] that include every partition knot j T / K.
std::vector<double> knot_breaks(double a, double b, double period, int segments) {
  std::vector<double> breaks{a};
  const double h = period / segments;
  for (double s = (std::floor(a / h) + 1.0) * h; s < b - 1e-12 * period; s += h) {
    if (s > a + 1e-12 * period) breaks.push_back(s);
  }
  breaks.push_back(b);
  return breaks;
}

}  // namespace

Vector PerturbedProblem::perturbation(double t, const Vector& x, double eps) const {
  Vector out = g(t, x, eps);
  if (out.size() != base.dimension) {
    throw Error(ErrorKind::InputDomain, "perturbation returned a vector of the wrong size");
  }
  if (!out.allFinite()) throw Error(ErrorKind::InputDomain, "perturbation returned a non-finite value", t);
  return out;
}

VectorField perturbed_field(const PerturbedProblem& problem, double eps) {
  VectorField out;
  out.dimension = problem.dimension();
  out.autonomous = false;
  out.rhs = [problem, eps](double t, const Vector& x) -> Vector {
    Vector y = problem.base(t, x);
    if (eps != 0.0) y += eps * problem.perturbation(t, x, eps);
    return y;
  };
  out.jacobian = [problem, eps](double t, const Vector& x) -> Matrix {
    Matrix j = problem.base.jacobian_at(t, x);
    if (eps == 0.0) return j;
    const auto n = x.size();
    Vector xp = x;
    for (Eigen::Index c = 0; c < n; ++c) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[c]));
      xp[c] = x[c] + h;
      const Vector up = problem.perturbation(t, xp, eps);
      xp[c] = x[c] - h;
      const Vector down = problem.perturbation(t, xp, eps);
      xp[c] = x[c];
      j.col(c) += eps * (up - down) / (2.0 * h);
    }
    return j;
  };
  return out;
}

double periodicity_defect(const PerturbedProblem& problem, const std::vector<Vector>& states,
                          double eps) {
  double worst = 0.0;
  const int samples = 16;
  for (const auto& x : states) {
    for (int k = 0; k < samples; ++k) {
      const double t = problem.period * (k + 0.37) / samples;
      const Vector a = problem.perturbation(t, x, eps);
      const Vector b = problem.perturbation(t + problem.period, x, eps);
      worst = std::max(worst, (a - b).lpNorm<Eigen::Infinity>());
    }
  }
  return worst;
}

PeriodicSolution PeriodicSolution::exact(const PerturbedProblem& problem, double eps) {
  if (!problem.exact_solution) {
    throw Error(ErrorKind::InputDomain, "problem '" + problem.name + "' has no closed-form solution");
  }
  PeriodicSolution s;
  s.eps_ = eps;
  s.period_ = problem.period;
  s.source_ = "exact";
  s.eval_ = [sol = problem.exact_solution, eps](double t) { return sol(t, eps); };
  s.field_ = perturbed_field(problem, eps);
  s.residual_ = (s.eval_(problem.period) - s.eval_(0.0)).norm();
  return s;
}

PeriodicSolution PeriodicSolution::from_cycle(const LimitCycle& cycle) {
  PeriodicSolution s;
  s.period_ = cycle.period();
  s.source_ = "cycle";
  s.eval_ = [cycle](double t) { return cycle.state(t); };
  s.field_ = cycle.field();
  return s;
}

Vector PeriodicSolution::operator()(double t) const { return eval_(wrap(t + offset_, period_)); }

Vector PeriodicSolution::velocity(double t) const {
  return field_(wrap(t + offset_, period_), (*this)(t));
}

PeriodicSolution PeriodicSolution::shifted(double tau) const {
  PeriodicSolution s = *this;
  s.offset_ += tau;
  return s;
}

PeriodicSolution find_periodic_solution(const PerturbedProblem& problem, double eps,
                                        const LimitCycle& cycle,
                                        const std::optional<Vector>& warm_start,
                                        const ShootingOptions& opts) {
  if (!(eps > 0.0 && eps <= 1.0)) throw Error(ErrorKind::InputDomain, "eps must lie in (0,1]", eps);
  const int n = problem.dimension();
  const double period = problem.period;
  const VectorField field = perturbed_field(problem, eps);
  Vector xi = warm_start ? *warm_start : cycle.anchor();
  if (xi.size() != n) throw Error(ErrorKind::InputDomain, "warm start has wrong dimension");

  auto residual = [&](const Vector& x, SensitivityResult* sens) {
    SensitivityResult s = flow_with_sensitivity(field, period, 0.0, x, opts.integration_tol);
    Vector r = s.state - x;
    if (sens != nullptr) *sens = std::move(s);
    return r;
  };

  SensitivityResult sens;
  Vector r = residual(xi, &sens);
  int iter = 0;
  double condition = condition_number(sens.sensitivity - Matrix::Identity(n, n));
  while (r.norm() > opts.tol) {
    if (iter >= opts.max_iter) {
      std::ostringstream os;
      os << "shooting for eps = " << eps << " did not converge after " << opts.max_iter
         << " iterations (residual " << r.norm() << ")";
      throw Error(ErrorKind::ExistenceNotEstablished, os.str(), r.norm());
    }
    const Matrix jac = sens.sensitivity - Matrix::Identity(n, n);
    condition = condition_number(jac);
    const Vector step = jac.partialPivLu().solve(-r);
    if (!step.allFinite()) {
      throw Error(ErrorKind::ExistenceNotEstablished, "singular shooting Jacobian", r.norm());
    }
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 30 && !accepted; ++k, lambda *= 0.5) {
      const Vector candidate = xi + lambda * step;
      SensitivityResult s_new;
      Vector r_new;
      try {
        r_new = residual(candidate, &s_new);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::IntegrationFailure && e.kind() != ErrorKind::InputDomain) throw;
        continue;
      }
      if (r_new.norm() < r.norm()) {
        xi = candidate;
        r = r_new;
        sens = std::move(s_new);
        accepted = true;
      }
    }
    if (!accepted) {
      std::ostringstream os;
      os << "shooting for eps = " << eps << " stalled at residual " << r.norm();
      throw Error(ErrorKind::ExistenceNotEstablished, os.str(), r.norm());
    }
    ++iter;
  }

  auto orbit = std::make_shared<const Trajectory>(integrate(field, 0.0, period, xi, opts.integration_tol));
  PeriodicSolution s;
  s.eps_ = eps;
  s.period_ = period;
  s.source_ = "computed";
  s.eval_ = [orbit](double t) { return (*orbit)(t); };
  s.field_ = field;
  s.residual_ = r.norm();
  s.iterations_ = iter;
  s.condition_ = condition;
  if (condition > opts.condition_cap) {
    std::ostringstream os;
    os << "shooting Jacobian condition number " << condition << " exceeds " << opts.condition_cap;
    s.warnings_.push_back(os.str());
  }
  return s;
}

std::string to_string(SurfaceMode mode) { return mode == SurfaceMode::flowed ? "flowed" : "section"; }

SurfaceMode surface_mode_from_string(const std::string& name) {
  if (name == "section") return SurfaceMode::section;
  if (name == "flowed") return SurfaceMode::flowed;
  throw Error(ErrorKind::InputDomain, "unknown surface mode '" + name + "'");
}

Surface::Surface(const LimitCycle& cycle, Matrix a, SurfaceMode mode)
    : mode_(mode),
      a_(std::move(a)),
      anchor_(cycle.anchor()),
      period_(cycle.period()),
      tol_(cycle.tolerance()),
      field_(cycle.field()) {
  tangent_ = derivative(Vector::Zero(a_.cols()));
  Matrix frame(anchor_.size(), a_.cols() + 1);
  frame.col(0) = cycle.velocity(0.0);
  frame.rightCols(a_.cols()) = tangent_;
  margin_ = smallest_singular_value(unit_columns(frame));
}

Vector Surface::operator()(const Vector& v) const {
  const Vector h = anchor_ + a_ * v;
  if (mode_ == SurfaceMode::section) return h;
  return flow(field_, period_, 0.0, h, tol_);
}

Matrix Surface::derivative(const Vector& v) const {
  if (mode_ == SurfaceMode::section) return a_;
  return flow_with_sensitivity(field_, period_, 0.0, anchor_ + a_ * v, tol_).sensitivity * a_;
}

Matrix default_surface_basis(const LimitCycle& cycle) {
  const int n = cycle.dimension();
  const Vector v = cycle.velocity(0.0).normalized();
  const Matrix column = v;
  Eigen::HouseholderQR<Matrix> qr(column);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  Matrix a = q.rightCols(n - 1);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    Eigen::Index i = 0;
    a.col(j).cwiseAbs().maxCoeff(&i);
    if (a(i, j) < 0.0) a.col(j) = -a.col(j);
  }
  return a;
}

Surface build_surface(const LimitCycle& cycle, const std::optional<Matrix>& a, SurfaceMode mode,
                      double threshold) {
  const int n = cycle.dimension();
  Matrix basis = a ? *a : default_surface_basis(cycle);
  if (basis.rows() != n || basis.cols() != n - 1) {
    std::ostringstream os;
    os << "surface matrix must be " << n << "x" << n - 1 << ", got " << basis.rows() << "x"
       << basis.cols();
    throw Error(ErrorKind::InvalidSurfaceMatrix, os.str());
  }
  Matrix frame(n, n);
  frame.col(0) = cycle.velocity(0.0);
  frame.rightCols(n - 1) = basis;
  const double sv = smallest_singular_value(unit_columns(frame));
  if (!(sv > 1e-10)) {
    throw Error(ErrorKind::InvalidSurfaceMatrix, "(x0'(0), A) is singular", sv);
  }
  Surface s(cycle, std::move(basis), mode);
  if (!(s.margin() > threshold)) {
    std::ostringstream os;
    os << "transversality margin " << s.margin() << " is below " << threshold;
    throw Error(ErrorKind::TransversalityFailure, os.str(), s.margin());
  }
  return s;
}

double default_r0(const LimitCycle& cycle) {
  const int samples = 256;
  std::vector<Vector> pts;
  pts.reserve(samples);
  for (int i = 0; i < samples; ++i) pts.push_back(cycle.state(cycle.period() * i / samples));
  double closest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    for (int j = i + samples / 4; j <= i + samples - samples / 4; ++j) {
      closest = std::min(closest, (pts[i] - pts[j % samples]).norm());
    }
  }
  return 0.5 * std::min(cycle.period() / 4.0, 0.5 * closest);
}

ShiftSolution solve_shift(const PeriodicSolution& x_eps, const Surface& surface, double r0,
                          const ShiftOptions& opts) {
  if (!(r0 > 0.0)) throw Error(ErrorKind::InputDomain, "r0 must be positive", r0);
  const auto n = surface.anchor().size();
  const auto m = n - 1;
  auto residual = [&](const Vector& u) -> Vector {
    return x_eps(u[0]) - surface(u.tail(m));
  };
  auto inside = [&](const Vector& u) { return std::abs(u[0]) <= r0 && u.tail(m).norm() <= r0; };

  Vector u = Vector::Zero(n);
  Vector r = residual(u);
  int iter = 0;
  while (r.norm() > opts.tol) {
    if (iter >= opts.max_iter) {
      throw Error(ErrorKind::ShiftNotFound, "shift Newton did not converge inside the box",
                  r.norm());
    }
    Matrix jac(n, n);
    jac.col(0) = x_eps.velocity(u[0]);
    jac.rightCols(m) = -surface.derivative(u.tail(m));
    Eigen::JacobiSVD<Matrix> svd(jac);
    const auto& sv = svd.singularValues();
    if (!(sv[n - 1] > 1e-13 * sv[0])) {
      throw Error(ErrorKind::DegenerateCrossing, "shift Jacobian (x_eps', -S') is singular",
                  sv[n - 1]);
    }
    const Vector step = jac.partialPivLu().solve(-r);
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 30 && !accepted; ++k, lambda *= 0.5) {
      const Vector candidate = u + lambda * step;
      if (!inside(candidate)) continue;
      const Vector r_new = residual(candidate);
      if (r_new.norm() < r.norm()) {
        u = candidate;
        r = r_new;
        accepted = true;
      }
    }
    if (!accepted) {
      std::ostringstream os;
      os << "no crossing of the surface within r0 = " << r0 << " (best residual " << r.norm()
         << ")";
      throw Error(ErrorKind::ShiftNotFound, os.str(), r.norm());
    }
    ++iter;
  }
  ShiftSolution out;
  out.delta = u[0];
  out.v = u.tail(m);
  out.residual = r.norm();
  out.eps = x_eps.eps();
  out.mode = surface.mode();
  out.iterations = iter;
  out.r0 = r0;
  return out;
}

ShiftSolution shift_for_phase(const PeriodicSolution& x_eps, const LimitCycle& cycle, double tau,
                              SurfaceMode mode, double r0, const ShiftOptions& opts) {
  if (tau == 0.0) return solve_shift(x_eps, build_surface(cycle, std::nullopt, mode), r0, opts);
  const LimitCycle moved = cycle.reanchored(tau);
  return solve_shift(x_eps.shifted(tau), build_surface(moved, std::nullopt, mode), r0, opts);
}

DeviationProfile shifted_deviation(const PeriodicSolution& x_eps, const LimitCycle& cycle,
                                   double delta, int m) {
  if (m < 16) throw Error(ErrorKind::InputDomain, "deviation grid needs at least 16 points", m);
  DeviationProfile p;
  p.eps = x_eps.eps();
  p.delta = delta;
  for (int j = 0; j < m; ++j) {
    const double t = cycle.period() * j / m;
    const double d = (x_eps(t + delta) - cycle.state(t)).norm();
    p.t.push_back(t);
    p.d.push_back(d);
    p.sup = std::max(p.sup, d);
  }
  p.sup_ratio = p.eps > 0.0 ? p.sup / p.eps : std::numeric_limits<double>::quiet_NaN();
  return p;
}

double mperp(const FloquetEntry& entry, const LimitCycle& cycle, const PerturbedProblem& problem,
             double t) {
  const double rho = entry.multiplier();
  if (entry.periodic() || std::abs(rho - 1.0) <= kDegenerateMultiplierThreshold) {
    std::ostringstream os;
    os << "multiplier " << rho << " of " << entry.label() << " is too close to 1";
    throw Error(ErrorKind::DegenerateMultiplier, os.str(), rho);
  }
  const double period = cycle.period();
  const auto integrand = [&](double s) {
    return entry(s).dot(problem.perturbation(s, cycle.state(s), 0.0));
  };
  const auto breaks = knot_breaks(t - period, t, period, entry.segments().size());
  return rho / (rho - 1.0) * numerics::integrate_pieces(integrand, breaks);
}

double malkin(const FloquetEntry& z0, const LimitCycle& cycle, const PerturbedProblem& problem,
              double t) {
  const double period = cycle.period();
  const auto integrand = [&](double s) {
    return z0(s).dot(problem.perturbation(s - t, cycle.state(s), 0.0));
  };
  return numerics::integrate_pieces(integrand, knot_breaks(0.0, period, period, z0.segments().size()));
}

double scalar_projection(const PeriodicSolution& x_eps, double delta, const FloquetEntry& entry,
                         const LimitCycle& cycle, double t) {
  if (!(x_eps.eps() > 0.0)) throw Error(ErrorKind::InputDomain, "scalar projection needs eps > 0");
  return entry(t).dot(x_eps(t + delta) - cycle.state(t)) / x_eps.eps();
}

FirstVariation::FirstVariation(const LimitCycle& cycle, Trajectory augmented, double residual)
    : n_(cycle.dimension()),
      period_(cycle.period()),
      augmented_(std::make_shared<const Trajectory>(std::move(augmented))),
      residual_(residual) {
  initial_ = augmented_->front().tail(n_);
}

Vector FirstVariation::operator()(double t) const {
  return (*augmented_)(wrap(t, period_)).tail(n_);
}

FirstVariation first_variation(const LimitCycle& cycle, const PerturbedProblem& problem,
                               const FloquetEntry& z0, double solvability_tol) {
  const double solvability = malkin(z0, cycle, problem, 0.0);
  if (std::abs(solvability) > solvability_tol) {
    std::ostringstream os;
    os << "Malkin function at 0 is " << solvability
       << "; the first variation has no periodic solution";
    throw Error(ErrorKind::NoPeriodicFirstVariation, os.str(), solvability);
  }
  const int n = cycle.dimension();
  const double period = cycle.period();
  const VectorField& f = cycle.field();

  // (x, vec(Y), y): fundamental matrix and particular solution together.
  VectorField full;
  full.dimension = n + n * n + n;
  full.autonomous = false;
  full.rhs = [&](double t, const Vector& w) {
    const Vector x = w.head(n);
    const Matrix a = f.jacobian_at(t, x);
    Vector out(w.size());
    out.head(n) = f(t, x);
    Eigen::Map<Matrix>(out.data() + n, n, n) = a * Eigen::Map<const Matrix>(w.data() + n, n, n);
    out.tail(n) = a * w.tail(n) + problem.perturbation(t, x, 0.0);
    return out;
  };
  Vector w0 = Vector::Zero(full.dimension);
  w0.head(n) = cycle.anchor();
  Eigen::Map<Matrix>(w0.data() + n, n, n).setIdentity();
  const Vector w1 = flow(full, period, 0.0, w0, cycle.tolerance());
  const Matrix monodromy = Eigen::Map<const Matrix>(w1.data() + n, n, n);

  Matrix lhs(n + 1, n);
  lhs.topRows(n) = monodromy - Matrix::Identity(n, n);
  lhs.row(n) = cycle.velocity(0.0).transpose();
  Vector rhs = Vector::Zero(n + 1);
  rhs.head(n) = -w1.tail(n);
  const Vector y0 = lhs.colPivHouseholderQr().solve(rhs);

  VectorField pair;
  pair.dimension = 2 * n;
  pair.autonomous = false;
  pair.rhs = [f, problem, n](double t, const Vector& w) {
    const Vector x = w.head(n);
    Vector out(2 * n);
    out.head(n) = f(t, x);
    out.tail(n) = f.jacobian_at(t, x) * w.tail(n) + problem.perturbation(t, x, 0.0);
    return out;
  };
  Vector start(2 * n);
  start << cycle.anchor(), y0;
  Trajectory traj = integrate(pair, 0.0, period, start, cycle.tolerance());
  const double residual = (traj.back().tail(n) - y0).norm();
  return FirstVariation(cycle, std::move(traj), residual);
}

double phase_lock_offset(const FloquetEntry& z0, const LimitCycle& cycle,
                         const PerturbedProblem& problem, int samples) {
  const double period = cycle.period();
  const auto m = [&](double theta) { return malkin(z0, cycle, problem, theta); };
  std::vector<double> theta(samples + 1), value(samples + 1);
  for (int j = 0; j <= samples; ++j) {
    theta[j] = period * j / samples;
    value[j] = j == samples ? value[0] : m(theta[j]);
  }
  std::vector<double> roots;
  for (int j = 0; j < samples; ++j) {
    if (value[j] == 0.0) {
      roots.push_back(theta[j]);
    } else if (value[j] * value[j + 1] < 0.0) {
      roots.push_back(numerics::find_root(m, theta[j], theta[j + 1]));
    }
  }
  if (roots.empty()) {
    throw Error(ErrorKind::ExistenceNotEstablished, "the Malkin function has no sign change");
  }
  double best = std::numeric_limits<double>::infinity();
  for (double r : roots) {
    const double centred = r > period / 2.0 ? r - period : r;
    if (std::abs(centred) < std::abs(best)) best = centred;
  }
  return best;
}

}  // namespace cycleshift
