#include "cycleshift/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cycleshift/errors.hpp"

namespace cycleshift {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Continuous extension (Hairer, Norsett & Wanner).
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 5.0;
constexpr std::size_t kMaxSteps = 2'000'000;
constexpr double kLocalToleranceFactor = 0.01;

double weighted_rms(const Vector& v, const Vector& scale) {
  return std::sqrt((v.array() / scale.array()).square().mean());
}

Vector error_scale(const Vector& y0, const Vector& y1, double tol) {
  return (tol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array().max(1.0)).matrix();
}

double initial_step(const VectorField& f, double t0, const Vector& y0, const Vector& f0,
                    double tol, double dir, double span) {
  const Vector sk = (tol * y0.cwiseAbs().array().max(1.0)).matrix();
  const double dnf = weighted_rms(f0, sk);
  const double dny = weighted_rms(y0, sk);
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
  h = std::min(h, span);
  const Vector y1 = y0 + dir * h * f0;
  const Vector f1 = f(t0 + dir * h, y1);
  const double der2 = weighted_rms(f1 - f0, sk) / h;
  const double der12 = std::max(std::abs(der2), dnf);
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
  return std::min({100.0 * h, h1, span});
}

}  // namespace

Vector VectorField::operator()(double t, const Vector& x) const {
  Vector out = rhs(t, x);
  if (out.size() != dimension) {
    std::ostringstream os;
    os << "right-hand side returned " << out.size() << " components, expected " << dimension;
    throw Error(ErrorKind::InputDomain, os.str());
  }
  if (!out.allFinite()) {
    std::ostringstream os;
    os << "non-finite right-hand side at t=" << t;
    throw Error(ErrorKind::InputDomain, os.str(), t);
  }
  return out;
}

Matrix VectorField::jacobian_at(double t, const Vector& x) const {
  if (jacobian) return jacobian(t, x);
  return finite_difference_jacobian(*this, t, x);
}

Matrix finite_difference_jacobian(const VectorField& field, double t, const Vector& x) {
  const int n = field.dimension;
  const double h = std::max(1e-6, 1e-6 * x.norm());
  Matrix jac(n, n);
  Vector xp = x;
  Vector xm = x;
  for (int j = 0; j < n; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    jac.col(j) = (field(t, xp) - field(t, xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return jac;
}

class TrajectoryBuilder {
 public:
  TrajectoryBuilder(int n, double t0, double t1, double tol, const Vector& x0) {
    traj_.dimension_ = n;
    traj_.t0_ = t0;
    traj_.t1_ = t1;
    traj_.tolerance_ = tol;
    traj_.front_ = x0;
    traj_.back_ = x0;
  }

  void add(double t, double h, Matrix coeffs, const Vector& y1) {
    traj_.starts_.push_back(t);
    traj_.widths_.push_back(h);
    traj_.coefficients_.push_back(std::move(coeffs));
    traj_.back_ = y1;
  }

  Trajectory finish() && { return std::move(traj_); }

 private:
  Trajectory traj_;
};

namespace {

// Runs the adaptive pair from t0 to t1 (either direction). When `builder` is
// null no dense coefficients are kept.
Vector run(const VectorField& f, double t0, double t1, const Vector& x_init, double tol,
           TrajectoryBuilder* builder) {
  if (!(tol >= 1e-14 && tol <= 1e-3)) {
    throw Error(ErrorKind::InputDomain, "integration tolerance must lie in [1e-14, 1e-3]", tol);
  }
  if (x_init.size() != f.dimension) {
    throw Error(ErrorKind::InputDomain, "initial state has wrong dimension");
  }
  if (!x_init.allFinite() || !std::isfinite(t0) || !std::isfinite(t1)) {
    throw Error(ErrorKind::InputDomain, "non-finite initial data");
  }
  Vector y = x_init;
  if (t1 == t0) return y;
  // Steps are controlled at a fraction of tol so that global errors over a
  // period stay near tol.
  const double local_tol = kLocalToleranceFactor * tol;

  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double t = t0;
  Vector k1 = f(t, y);
  double h = initial_step(f, t0, y, k1, local_tol, dir, span);
  bool rejected = false;

  for (std::size_t step = 0; step < kMaxSteps; ++step) {
    bool last = false;
    if (h >= std::abs(t1 - t)) {
      h = std::abs(t1 - t);
      last = true;
    }
    const double hs = dir * h;
    const Vector k2 = f(t + c2 * hs, y + hs * a21 * k1);
    const Vector k3 = f(t + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
    const Vector k4 = f(t + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = f(t + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 =
        f(t + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vector y1 = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const double t_next = last ? t1 : t + hs;
    const Vector k7 = f(t_next, y1);
    const Vector err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double err_norm = weighted_rms(err, error_scale(y, y1, local_tol));

    if (err_norm <= 1.0) {
      if (builder != nullptr) {
        Matrix c(f.dimension, 5);
        const Vector ydiff = y1 - y;
        const Vector bspl = hs * k1 - ydiff;
        c.col(0) = y;
        c.col(1) = ydiff;
        c.col(2) = bspl;
        c.col(3) = ydiff - hs * k7 - bspl;
        c.col(4) = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        builder->add(t, t_next - t, std::move(c), y1);
      }
      t = t_next;
      y = y1;
      k1 = k7;
      if (last) return y;
      double fac = err_norm > 0.0 ? kSafety * std::pow(err_norm, -0.2) : kFacMax;
      fac = std::clamp(fac, kFacMin, kFacMax);
      if (rejected) fac = std::min(fac, 1.0);
      h *= fac;
      rejected = false;
    } else {
      h *= std::max(kFacMin, kSafety * std::pow(err_norm, -0.2));
      rejected = true;
    }
    if (!std::isfinite(h) || h < 1e-14 * std::max(1.0, std::abs(t))) {
      std::ostringstream os;
      os << "step size underflow at t=" << t;
      throw Error(ErrorKind::IntegrationFailure, os.str(), t);
    }
  }
  std::ostringstream os;
  os << "maximum number of steps exceeded at t=" << t;
  throw Error(ErrorKind::IntegrationFailure, os.str(), t);
}

}  // namespace

std::vector<double> Trajectory::knots() const {
  std::vector<double> out(starts_);
  out.push_back(t1_);
  return out;
}

std::size_t Trajectory::segment_of(double t) const {
  const double dir = t1_ >= t0_ ? 1.0 : -1.0;
  // first segment whose start lies beyond t (in integration direction)
  auto it = std::upper_bound(starts_.begin(), starts_.end(), t,
                             [dir](double value, double start) { return dir * value < dir * start; });
  if (it == starts_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
}

Vector Trajectory::operator()(double t) const {
  const double lo = std::min(t0_, t1_);
  const double hi = std::max(t0_, t1_);
  const double slack = 1e-12 * std::max(1.0, std::abs(hi - lo));
  if (t < lo - slack || t > hi + slack) {
    std::ostringstream os;
    os << "trajectory evaluated at t=" << t << " outside [" << lo << ", " << hi << "]";
    throw Error(ErrorKind::InputDomain, os.str(), t);
  }
  if (starts_.empty()) return front_;
  if (t == t0_) return front_;
  if (t == t1_) return back_;
  const std::size_t k = segment_of(t);
  const double theta = (t - starts_[k]) / widths_[k];
  const double theta1 = 1.0 - theta;
  const Matrix& c = coefficients_[k];
  return c.col(0) + theta * (c.col(1) + theta1 * (c.col(2) + theta * (c.col(3) + theta1 * c.col(4))));
}

Trajectory integrate(const VectorField& field, double t0, double t1, const Vector& x_init,
                     double tol) {
  TrajectoryBuilder builder(field.dimension, t0, t1, tol, x_init);
  run(field, t0, t1, x_init, tol, &builder);
  return std::move(builder).finish();
}

Vector flow(const VectorField& field, double t, double t0, const Vector& xi, double tol) {
  return run(field, t0, t, xi, tol, nullptr);
}

VectorField variational_field(const VectorField& field) {
  const int n = field.dimension;
  VectorField aug;
  aug.dimension = n + n * n;
  aug.autonomous = field.autonomous;
  aug.rhs = [field, n](double t, const Vector& u) {
    const Vector x = u.head(n);
    const Eigen::Map<const Matrix> y(u.data() + n, n, n);
    Vector out(n + n * n);
    out.head(n) = field(t, x);
    Eigen::Map<Matrix>(out.data() + n, n, n) = field.jacobian_at(t, x) * y;
    return out;
  };
  return aug;
}

SensitivityResult split_augmented(const Vector& augmented, int n) {
  SensitivityResult r;
  r.state = augmented.head(n);
  r.sensitivity = Eigen::Map<const Matrix>(augmented.data() + n, n, n);
  return r;
}

namespace {

Vector augmented_initial(const Vector& xi) {
  const auto n = xi.size();
  Vector u(n + n * n);
  u.head(n) = xi;
  Eigen::Map<Matrix>(u.data() + n, n, n).setIdentity();
  return u;
}

}  // namespace

SensitivityResult flow_with_sensitivity(const VectorField& field, double t, double t0,
                                        const Vector& xi, double tol) {
  const Vector u = run(variational_field(field), t0, t, augmented_initial(xi), tol, nullptr);
  return split_augmented(u, field.dimension);
}

Vector VariationalTrajectory::state(double t) const {
  return augmented_(t).head(dimension_);
}

Matrix VariationalTrajectory::sensitivity(double t) const {
  return split_augmented(augmented_(t), dimension_).sensitivity;
}

SensitivityResult VariationalTrajectory::at(double t) const {
  return split_augmented(augmented_(t), dimension_);
}

VariationalTrajectory integrate_variational(const VectorField& field, double t0, double t1,
                                            const Vector& xi, double tol) {
  return VariationalTrajectory(integrate(variational_field(field), t0, t1, augmented_initial(xi), tol),
                               field.dimension);
}

}  // namespace cycleshift
