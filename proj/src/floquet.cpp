#include "cycleshift/floquet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "cycleshift/errors.hpp"

namespace cycleshift {

namespace {

Matrix unvec(const Vector& augmented, int n) {
  return Eigen::Map<const Matrix>(augmented.data() + n, n, n);
}

Vector augmented_start(const Vector& x, int n) {
  Vector y(n + n * n);
  y.head(n) = x;
  Eigen::Map<Matrix>(y.data() + n, n, n).setIdentity();
  return y;
}

double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[s.size() - 1] == 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / s[s.size() - 1];
}

/// Scale so that the first component with |c| > 1e-6 |v| is positive.
void fix_sign(Vector& v) {
  const double thresh = 1e-6 * v.norm();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > thresh) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

/// One inverse-iteration step on (M - rho I), keeping the scale of `guess`.
Vector refine_eigenvector(const Matrix& m, double rho, const Vector& guess) {
  const int n = static_cast<int>(m.rows());
  const double shift = rho * (1.0 + 1e-12) + 1e-14;
  Vector w = (m - shift * Matrix::Identity(n, n)).partialPivLu().solve(guess);
  if (!w.allFinite() || w.norm() == 0.0) return guess;
  w.normalize();
  return w * w.dot(guess);
}

}  // namespace

VectorField adjoint_field(const VectorField& field) {
  const int n = field.dimension;
  VectorField aug;
  aug.dimension = n + n * n;
  aug.autonomous = field.autonomous;
  aug.rhs = [field, n](double t, const Vector& y) {
    const Vector x = y.head(n);
    Vector out(n + n * n);
    out.head(n) = field(t, x);
    const Matrix a = field.jacobian_at(t, x);
    Eigen::Map<Matrix>(out.data() + n, n, n) = -a.transpose() * unvec(y, n);
    return out;
  };
  return aug;
}

Matrix adjoint_fundamental(const LimitCycle& cycle, double t) {
  const int n = cycle.dimension();
  if (t == 0.0) return Matrix::Identity(n, n);
  const Vector end = integrate(adjoint_field(cycle.field()), 0.0, t,
                               augmented_start(cycle.anchor(), n), cycle.tolerance())
                         .back();
  return unvec(end, n);
}

SegmentedPropagator::SegmentedPropagator(const LimitCycle& cycle, int segments, Linearization kind)
    : kind_(kind), n_(cycle.dimension()), period_(cycle.period()) {
  if (segments < 1) throw Error(ErrorKind::InputDomain, "need at least one segment", segments);
  const VectorField aug = kind == Linearization::adjoint ? adjoint_field(cycle.field())
                                                         : variational_field(cycle.field());
  trajectories_.reserve(segments);
  propagators_.reserve(segments);
  for (int k = 0; k < segments; ++k) {
    const double a = period_ * k / segments;
    const double b = period_ * (k + 1) / segments;
    trajectories_.push_back(
        integrate(aug, a, b, augmented_start(cycle.state(a), n_), cycle.tolerance()));
    propagators_.push_back(unvec(trajectories_.back().back(), n_));
  }

  // M_k = P_{k-1} ... P_0 P_{K-1} ... P_k
  std::vector<Matrix> prefix(segments + 1), suffix(segments + 1);
  prefix[0] = Matrix::Identity(n_, n_);
  for (int k = 0; k < segments; ++k) prefix[k + 1] = propagators_[k] * prefix[k];
  suffix[segments] = Matrix::Identity(n_, n_);
  for (int k = segments - 1; k >= 0; --k) suffix[k] = suffix[k + 1] * propagators_[k];
  phase_monodromies_.reserve(segments);
  for (int k = 0; k < segments; ++k) phase_monodromies_.push_back(prefix[k] * suffix[k]);
}

int SegmentedPropagator::segment_of(double t) const {
  const int k = static_cast<int>(std::floor(t / period_ * size()));
  return std::clamp(k, 0, size() - 1);
}

Matrix SegmentedPropagator::propagator(int k, double t) const {
  return unvec(trajectories_[k](t), n_);
}

FloquetEntry::FloquetEntry(std::string label, double multiplier, bool periodic,
                           std::string normalization,
                           std::shared_ptr<const SegmentedPropagator> segments,
                           std::vector<Vector> knot_values)
    : label_(std::move(label)),
      multiplier_(multiplier),
      periodic_(periodic),
      normalization_(std::move(normalization)),
      segments_(std::move(segments)),
      knot_values_(std::move(knot_values)) {}

Vector FloquetEntry::operator()(double t) const {
  const double period = segments_->period();
  const double m = std::floor(t / period);
  double tau = t - m * period;
  tau = std::clamp(tau, 0.0, period);
  const int k = segments_->segment_of(tau);
  const Vector local = segments_->propagator(k, tau) * knot_values_[k];
  if (m == 0.0) return local;
  return std::pow(multiplier_, m) * local;
}

FloquetEntry FloquetEntry::scaled(double c) const {
  FloquetEntry out = *this;
  for (auto& v : out.knot_values_) v *= c;
  return out;
}

const FloquetEntry& FloquetBasis::periodic() const {
  for (const auto& e : entries) {
    if (e.periodic()) return e;
  }
  throw Error(ErrorKind::NondegeneracyViolation, "basis has no periodic entry");
}

std::vector<FloquetEntry> FloquetBasis::non_periodic() const {
  std::vector<FloquetEntry> out;
  for (const auto& e : entries) {
    if (!e.periodic()) out.push_back(e);
  }
  return out;
}

namespace {

struct Mode {
  double rho;
  Vector v;
  bool periodic;
};

/// Real eigenpairs of the monodromy at knot 0, non-periodic by decreasing
/// multiplier and the unit multiplier last.
std::vector<Mode> real_modes(const SegmentedPropagator& segs, double cluster_tol) {
  const Matrix& m0 = segs.phase_monodromy(0);
  const auto n = m0.rows();
  Eigen::EigenSolver<Matrix> solver(m0, true);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::InvalidData, "eigen decomposition of the monodromy failed");
  }
  std::vector<Mode> modes;
  int unit_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto lambda = solver.eigenvalues()[i];
    if (std::abs(lambda.imag()) > 1e-10 * std::max(1.0, std::abs(lambda))) {
      std::ostringstream os;
      os << "multiplier " << lambda << " is complex; only real spectra are supported";
      throw Error(ErrorKind::UnsupportedSpectrum, os.str(), lambda.imag());
    }
    if (lambda.real() <= 0.0) {
      std::ostringstream os;
      os << "multiplier " << lambda.real() << " is not positive";
      throw Error(ErrorKind::UnsupportedSpectrum, os.str(), lambda.real());
    }
    const bool periodic = std::abs(lambda.real() - 1.0) <= cluster_tol;
    unit_count += periodic ? 1 : 0;
    modes.push_back({lambda.real(), solver.eigenvectors().col(i).real(), periodic});
  }
  if (unit_count != 1) {
    std::ostringstream os;
    os << "the multiplier +1 has algebraic multiplicity " << unit_count << ", expected 1";
    throw Error(ErrorKind::NondegeneracyViolation, os.str(), unit_count);
  }
  std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    if (a.periodic != b.periodic) return b.periodic;
    return a.rho > b.rho;
  });
  for (auto& md : modes) md.v = refine_eigenvector(m0, md.rho, md.v);
  return modes;
}

/// Values at the knots of the Floquet solution through v0. Each carried value
/// is re-projected onto the eigenvector of the phase monodromy at its knot so
/// the dominant mode cannot swamp the others.
std::vector<Vector> knot_chain(const SegmentedPropagator& segs, double rho, const Vector& v0) {
  const int K = segs.size();
  std::vector<Vector> knots;
  knots.reserve(K + 1);
  knots.push_back(v0);
  for (int k = 1; k < K; ++k) {
    const Vector carried = segs.segment_propagator(k - 1) * knots.back();
    knots.push_back(refine_eigenvector(segs.phase_monodromy(k), rho, carried));
  }
  knots.push_back(segs.segment_propagator(K - 1) * knots.back());
  return knots;
}

double column_condition(const std::vector<FloquetEntry>& entries) {
  const auto n = static_cast<Eigen::Index>(entries.size());
  Matrix w(n, n);
  for (Eigen::Index i = 0; i < n; ++i) w.col(i) = entries[i].initial();
  return condition_number(w);
}

}  // namespace

FloquetBasis floquet_basis(const LimitCycle& cycle, const FloquetOptions& opts) {
  auto segs = std::make_shared<const SegmentedPropagator>(cycle, opts.segments,
                                                          Linearization::adjoint);
  const Vector velocity0 = cycle.velocity(0.0);
  FloquetBasis basis;
  basis.adjoint_monodromy = segs->phase_monodromy(0);
  int label_index = 1;
  for (auto& md : real_modes(*segs, opts.cluster_tol)) {
    Vector v0 = md.v;
    std::string normalization;
    if (md.periodic) {
      const double proj = velocity0.dot(v0);
      if (std::abs(proj) <= 1e-10 * velocity0.norm() * v0.norm()) {
        throw Error(ErrorKind::NormalizationImpossible,
                    "periodic adjoint solution is orthogonal to the cycle velocity", proj);
      }
      v0 /= proj;
      normalization = "velocity-projection";
    } else {
      v0.normalize();
      fix_sign(v0);
      normalization = "unit-norm";
    }
    const std::string label = md.periodic ? "z0" : "z" + std::to_string(label_index++);
    basis.entries.emplace_back(label, md.rho, md.periodic, normalization, segs,
                               knot_chain(*segs, md.rho, v0));
  }
  basis.condition = column_condition(basis.entries);
  basis.complete = std::isfinite(basis.condition) && basis.condition <= opts.condition_cap;
  return basis;
}

std::vector<FloquetEntry> forward_floquet_solutions(const LimitCycle& cycle,
                                                    const FloquetOptions& opts) {
  auto segs = std::make_shared<const SegmentedPropagator>(cycle, opts.segments,
                                                          Linearization::forward);
  std::vector<FloquetEntry> out;
  int label_index = 1;
  for (auto& md : real_modes(*segs, opts.cluster_tol)) {
    Vector v0 = md.v.normalized();
    fix_sign(v0);
    const std::string label = md.periodic ? "y0" : "y" + std::to_string(label_index++);
    out.emplace_back(label, md.rho, md.periodic, "unit-norm", segs,
                     knot_chain(*segs, md.rho, v0));
  }
  return out;
}

FloquetDiagnostics floquet_diagnostics(const FloquetBasis& basis, const LimitCycle& cycle,
                                       int grid) {
  if (!basis.complete) {
    throw Error(ErrorKind::IllConditionedBasis, "Floquet basis is not complete", basis.condition);
  }
  const int n = cycle.dimension();
  const double period = cycle.period();
  FloquetDiagnostics d;
  d.grid = grid;
  d.basis_condition = basis.condition;

  const std::vector<FloquetEntry> forward = forward_floquet_solutions(cycle);

  for (int j = 0; j < grid; ++j) {
    const double t = period * j / grid;
    std::vector<Vector> ys;
    for (const auto& y : forward) ys.push_back(y(t));
    const Vector vel = cycle.velocity(t);
    Matrix w(n, n);
    for (int i = 0; i < n; ++i) {
      const auto& entry = basis.entries[i];
      const Vector z = entry(t);
      w.col(i) = z;
      for (std::size_t c = 0; c < forward.size(); ++c) {
        const Vector& y0 = forward[c].initial();
        const double drift = z.dot(ys[c]) - entry.initial().dot(y0);
        const double scale =
            std::max(z.norm() * ys[c].norm(), entry.initial().norm() * y0.norm());
        d.perron_defect = std::max(d.perron_defect, std::abs(drift) / scale);
      }
      if (!entry.periodic()) {
        d.orthogonality_defect =
            std::max(d.orthogonality_defect, std::abs(vel.dot(z)) / (vel.norm() * z.norm()));
      }
    }
    // Column-scaled condition: the eigenfunctions differ in size by design.
    Matrix scaled = w;
    for (int i = 0; i < n; ++i) scaled.col(i).normalize();
    const double cond = condition_number(scaled);
    if (!(cond <= 1e12)) {
      std::ostringstream os;
      os << "eigenfunction matrix is ill-conditioned at t = " << t << " (condition " << cond << ")";
      throw Error(ErrorKind::IllConditionedBasis, os.str(), t);
    }
    const Matrix dual = w.transpose().fullPivLu().inverse();
    // z0 is the last entry, so the last column of W^{-T} should equal x0'.
    d.dual_basis_defect = std::max(d.dual_basis_defect, (dual.col(n - 1) - vel).norm());
  }

  for (const auto& entry : basis.entries) {
    const auto& segs = entry.segments();
    const auto& knots = entry.knot_values();
    for (int k = 0; k < segs.size(); ++k) {
      const Matrix& m = segs.phase_monodromy(k);
      const double res = (m * knots[k] - entry.multiplier() * knots[k]).norm();
      d.floquet_relation_defect =
          std::max(d.floquet_relation_defect, res / (m.norm() * knots[k].norm()));
    }
    const Vector expected = entry.multiplier() * knots.front();
    d.closure_defect = std::max(d.closure_defect, (knots.back() - expected).norm() / expected.norm());
  }
  return d;
}

}  // namespace cycleshift
