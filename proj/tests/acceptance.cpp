// Acceptance suite: one pass/fail line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "cycleshift/analysis.hpp"
#include "cycleshift/errors.hpp"
#include "cycleshift/problems.hpp"

using namespace cycleshift;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

const ProblemInstance& example() {
  static const ProblemInstance inst = instantiate(registry_problem("paper-example"));
  return inst;
}

const FloquetBasis& example_basis() {
  static const FloquetBasis b = floquet_basis(example().cycle);
  return b;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Polar reduction r' = -r (r^2 - 1): multipliers 1 and exp(-4 pi).
void multipliers(Outcome& o) {
  const MonodromyData m = monodromy(example().cycle);
  const NondegeneracyCert cert = check_nondegenerate(m);
  const double e1 = rel(m.multipliers.at(0).value.real(), 1.0);
  const double e2 = rel(m.multipliers.at(1).value.real(), std::exp(-4.0 * kPi));
  o.detail << "rel err 1: " << e1 << ", e^{-4pi}: " << e2 << ", nondegenerate " << cert.nondegenerate;
  o.require(m.multipliers.size() == 2, "two multipliers");
  o.require(std::abs(m.multipliers[0].value.imag()) + std::abs(m.multipliers[1].value.imag()) == 0.0, "real");
  o.require(e1 <= 1e-6 && e2 <= 1e-6, "relative error <= 1e-6");
  o.require(cert.nondegenerate, "nondegenerate");
}

// z0 = (cos t, -sin t), z1 = e^{2t} (sin t, cos t); both solve the adjoint
// equation along (sin t, cos t), which is checked by substitution first.
void adjoint_forms(Outcome& o) {
  const VectorField f = circle_field(1.0);
  double substitution = 0.0, e0 = 0.0, e1 = 0.0;
  const FloquetBasis& b = example_basis();
  const FloquetEntry& z1 = b.entries.at(0);
  const FloquetEntry& z0 = b.periodic();
  for (int j = 0; j < 64; ++j) {
    const double t = 2.0 * kPi * j / 64;
    const Vector x = vec({std::sin(t), std::cos(t)});
    const Matrix at = f.jacobian_at(0.0, x).transpose();
    const Vector z0e = vec({std::cos(t), -std::sin(t)});
    const Vector z1e = std::exp(2.0 * t) * x;
    const Vector dz0 = vec({-std::sin(t), -std::cos(t)});
    const Vector dz1 = 2.0 * z1e + std::exp(2.0 * t) * vec({std::cos(t), -std::sin(t)});
    substitution = std::max(substitution, (dz0 + at * z0e).norm());
    substitution = std::max(substitution, (dz1 + at * z1e).norm() / z1e.norm());
    // Sign alignment: both eigenfunctions are only fixed up to sign.
    const double s0 = z0(t).dot(z0e) >= 0.0 ? 1.0 : -1.0;
    const double s1 = z1(t).dot(z1e) >= 0.0 ? 1.0 : -1.0;
    e0 = std::max(e0, (s0 * z0(t) - z0e).norm());
    e1 = std::max(e1, (s1 * z1(t) - z1e).norm() / z1e.norm());
  }
  const double em = rel(z1.multiplier(), std::exp(4.0 * kPi));
  o.detail << "substitution residual " << substitution << ", z0 err " << e0 << ", z1 rel err " << e1
           << ", multiplier rel err " << em;
  o.require(substitution <= 1e-10, "closed forms solve the adjoint equation");
  o.require(e0 <= 1e-6 && e1 <= 1e-6, "eigenfunctions within 1e-6");
  o.require(em <= 1e-6, "adjoint multiplier within 1e-6");
}

// M-perp_{z1}(t) = e^{2t}; Malkin(t) = -pi sin t.
void bifurcation(Outcome& o) {
  const auto& inst = example();
  const FloquetBasis& b = example_basis();
  double em = 0.0, ek = 0.0;
  for (double t : {0.0, kPi / 2, kPi, 3 * kPi / 2}) {
    em = std::max(em, rel(mperp(b.entries.at(0), inst.cycle, inst.problem, t), std::exp(2.0 * t)));
    ek = std::max(ek, std::abs(malkin(b.periodic(), inst.cycle, inst.problem, t) + kPi * std::sin(t)));
  }
  const double at0 = std::abs(malkin(b.periodic(), inst.cycle, inst.problem, 0.0));
  const double h = 1e-4;
  const double slope = (malkin(b.periodic(), inst.cycle, inst.problem, h) -
                        malkin(b.periodic(), inst.cycle, inst.problem, -h)) / (2.0 * h);
  o.detail << "M-perp rel err " << em << ", Malkin abs err " << ek << ", |Malkin(0)| " << at0
           << ", Malkin'(0) + pi = " << slope + kPi;
  o.require(em <= 1e-6, "M-perp relative 1e-6");
  o.require(ek <= 1e-8, "Malkin absolute 1e-8");
  o.require(at0 <= 1e-9, "Malkin(0) within 1e-9");
  o.require(std::abs(slope + kPi) <= 1e-4, "Malkin'(0) = -pi within 1e-4");
}

void shift_exactness(Outcome& o) {
  const auto& inst = example();
  const Surface s = build_surface(inst.cycle);
  const double r0 = default_r0(inst.cycle);
  double worst_shift = 0.0, worst_ratio = 0.0;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    const PeriodicSolution x = PeriodicSolution::exact(inst.problem, eps);
    const double delta = solve_shift(x, s, r0).delta;
    worst_shift = std::max(worst_shift, std::abs(delta - std::sqrt(eps)));
    for (double d : shifted_deviation(x, inst.cycle, delta).d) worst_ratio = std::max(worst_ratio, std::abs(d / eps - 1.0));
  }
  o.detail << "max |delta - sqrt eps| " << worst_shift << ", max |ratio - 1| " << worst_ratio;
  o.require(worst_shift <= 1e-9, "shift within 1e-9");
  o.require(worst_ratio <= 1e-6, "ratio profile within 1e-6");
}

void orders(Outcome& o) {
  SweepConfig c;
  c.eps = {1e-2, 1e-3, 1e-4, 1e-5};
  c.threads = default_thread_count();
  const ConvergenceReport r = sweep(example().problem, example().cycle, c);
  o.detail << "p_shifted " << r.shifted.p << ", p_unshifted " << r.unshifted.p;
  o.require(r.shifted.fitted && std::abs(r.shifted.p - 1.0) <= 0.02, "p_shifted = 1.00 +- 0.02");
  o.require(r.unshifted.fitted && std::abs(r.unshifted.p - 0.5) <= 0.05, "p_unshifted = 0.50 +- 0.05");
}

void projection_identity(Outcome& o) {
  const auto& inst = example();
  const FloquetEntry& z1 = example_basis().entries.at(0);
  const double eps = 1e-4;
  const PeriodicSolution exact = PeriodicSolution::exact(inst.problem, eps);
  const PeriodicSolution computed = find_periodic_solution(inst.problem, eps, inst.cycle);
  const double delta = solve_shift(computed, build_surface(inst.cycle), default_r0(inst.cycle)).delta;
  double ea = 0.0, ec = 0.0;
  for (int j = 0; j < 16; ++j) {
    const double t = 2.0 * kPi * j / 16;
    const double m = mperp(z1, inst.cycle, inst.problem, t);
    ea = std::max(ea, std::abs(scalar_projection(exact, std::sqrt(eps), z1, inst.cycle, t) - m) / m);
    ec = std::max(ec, std::abs(scalar_projection(computed, delta, z1, inst.cycle, t) - m) / m);
  }
  o.detail << "closed-form shift rel err " << ea << ", computed shift rel err " << ec;
  o.require(ea <= 1e-6, "closed-form shift within 1e-6");
  o.require(ec <= 0.05, "computed shift within 0.05");
}

void invariants(Outcome& o) {
  const double tol = kDefaultTolerance;
  const VectorField f = circle_field(1.0);
  const Vector xi = vec({0.3, 1.2});
  const double composition =
      (flow(f, 2.0, 0.0, xi) - flow(f, 2.0, 0.7, flow(f, 0.7, 0.0, xi))).norm();
  const double inverse = (flow(f, 0.0, 1.0, flow(f, 1.0, 0.0, xi)) - xi).norm();

  const VectorField v = van_der_pol_field(1.0);
  const Vector y = vec({1.5, -0.4});
  const Matrix sens = flow_with_sensitivity(v, 3.0, 0.0, y).sensitivity;
  Matrix fd(2, 2);
  for (int k = 0; k < 2; ++k) {
    Vector e = Vector::Zero(2);
    e[k] = 1e-5;
    fd.col(k) = (flow(v, 3.0, 0.0, y + e, 1e-12) - flow(v, 3.0, 0.0, y - e, 1e-12)) / 2e-5;
  }
  const double sensitivity = (sens - fd).norm() / fd.norm();

  double perron = 0.0, orth = 0.0, dual = 0.0, quasi = 0.0;
  for (const auto& name : {"paper-example", "circle3d"}) {
    const ProblemInstance inst = instantiate(registry_problem(name));
    const FloquetBasis b = floquet_basis(inst.cycle);
    const FloquetDiagnostics d = floquet_diagnostics(b, inst.cycle);
    perron = std::max(perron, d.perron_defect);
    orth = std::max(orth, d.orthogonality_defect);
    dual = std::max(dual, d.dual_basis_defect);
    for (const auto& z : b.non_periodic()) {
      for (double t : {0.3, 2.0}) {
        const double now = mperp(z, inst.cycle, inst.problem, t);
        const double next = mperp(z, inst.cycle, inst.problem, t + inst.cycle.period());
        const double scale = std::max(std::abs(next), std::abs(z.multiplier() * now));
        if (scale > 0.0) quasi = std::max(quasi, std::abs(next - z.multiplier() * now) / scale);
      }
    }
  }
  o.detail << "composition " << composition << ", inverse " << inverse << ", sensitivity " << sensitivity
           << ", Perron " << perron << ", orthogonality " << orth << ", dual basis " << dual
           << ", M-perp quasi-periodicity " << quasi;
  o.require(composition <= 10.0 * tol && inverse <= 10.0 * tol, "flow composition/inverse <= 10 tol");
  o.require(sensitivity <= 1e-6, "sensitivity vs finite differences <= 1e-6");
  o.require(perron <= 1e-8, "Perron <= 1e-8");
  o.require(orth <= 1e-8, "orthogonality <= 1e-8");
  o.require(dual <= 1e-7, "dual basis <= 1e-7");
  o.require(quasi <= 1e-8, "quasi-periodicity <= 1e-8");
}

void flowed_mode(Outcome& o) {
  const ProblemInstance soft = instantiate(registry_problem("circle-soft"));
  const Surface fs = build_surface(soft.cycle, std::nullopt, SurfaceMode::flowed);
  const Surface ss = build_surface(soft.cycle);
  const double r0 = default_r0(soft.cycle);
  std::optional<Vector> warm;
  for (double eps : {1e-2, 1e-3}) {
    const PeriodicSolution x = find_periodic_solution(soft.problem, eps, soft.cycle, warm);
    warm = x.initial();
    const ShiftSolution a = solve_shift(x, fs, r0);
    const ShiftSolution b = solve_shift(x, ss, r0);
    const double ra = shifted_deviation(x, soft.cycle, a.delta).sup_ratio;
    const double rb = shifted_deviation(x, soft.cycle, b.delta).sup_ratio;
    o.detail << "eps " << eps << ": |dF - dS|/eps " << std::abs(a.delta - b.delta) / eps << ", ratios " << ra
             << "/" << rb << "; ";
    o.require(std::abs(a.delta - b.delta) <= 5.0 * eps, "|delta_flowed - delta_section| <= 5 eps");
    o.require(std::max(ra, rb) / std::min(ra, rb) <= 2.0, "sup ratios within a factor 2");
  }
  std::string kind = "none";
  try {
    const auto& inst = example();
    solve_shift(PeriodicSolution::exact(inst.problem, 1e-3),
                build_surface(inst.cycle, std::nullopt, SurfaceMode::flowed), default_r0(inst.cycle));
  } catch (const Error& e) {
    kind = std::string(to_string(e.kind()));
  }
  o.detail << "paper-example flowed at 1e-3: " << kind;
  o.require(kind == "shift-not-found", "paper-example flowed returns shift-not-found");
}

void corollaries(Outcome& o) {
  SweepConfig c;
  c.eps = {1e-3, 1e-4};
  c.grid = 16;
  c.source = SolutionSource::exact;
  c.exact_shift = true;
  const CorollaryReport r = corollary_checks(example().problem, example().cycle, example_basis(), c);
  double c1 = 1e300, c2 = 0.0, margin = 1e300;
  for (const auto& b : r.bounds.rows) {
    c1 = std::min(c1, b.c1);
    c2 = std::max(c2, b.c2);
  }
  for (const auto& a : r.avoidance.rows) margin = std::min(margin, a.min_distance / a.eps);
  o.detail << "sign " << r.sign.agreements << " agree / " << r.sign.disagreements << " disagree / "
           << r.sign.skipped << " skipped, c1 " << c1 << ", c2 " << c2 << ", min distance/eps " << margin
           << ", branch " << r.dichotomy.branch;
  o.require(r.sign.verdict == Verdict::pass && r.sign.agreements == 32 && r.sign.skipped == 0,
            "sign agreement at all 32 points");
  o.require(r.bounds.verdict == Verdict::pass && c1 >= 0.9 && c1 <= c2 && c2 <= 1.1, "0.9 <= c1 <= c2 <= 1.1");
  o.require(r.avoidance.verdict == Verdict::pass && margin >= 0.9, "avoidance margin >= 0.9 eps");
  o.require(r.dichotomy.branch == "nonzero-cosine", "nonzero-cosine branch");
}

void van_der_pol(Outcome& o) {
  const ProblemInstance inst = instantiate(registry_problem("vdp-forced"));
  SweepConfig c;
  c.eps = {1e-2, 1e-3, 1e-4};
  c.threads = default_thread_count();
  const ConvergenceReport r = sweep(inst.problem, inst.cycle, c);
  double worst_residual = 0.0, lo = 1e300, hi = 0.0;
  bool all_ok = true;
  for (const auto& rec : r.records) {
    all_ok = all_ok && rec.ok;
    worst_residual = std::max(worst_residual, rec.residual_solution);
    lo = std::min(lo, rec.sup_shifted / rec.eps);
    hi = std::max(hi, rec.sup_shifted / rec.eps);
  }
  o.detail << "max residual " << worst_residual << ", p_shifted " << r.shifted.p << ", sup/eps in [" << lo << ", "
           << hi << "]";
  o.require(all_ok, "periodic solution and shift at every eps");
  o.require(worst_residual <= 1e-8, "residual <= 1e-8");
  o.require(r.shifted.fitted && std::abs(r.shifted.p - 1.0) <= 0.1, "p_shifted = 1.0 +- 0.1");
  o.require(hi <= 1.5 * lo, "bound constant stable within a factor 1.5");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"paper-example multipliers {1, e^{-4pi}} and nondegeneracy", multipliers},
      {"adjoint eigenfunctions match closed forms", adjoint_forms},
      {"M-perp = e^{2t}, Malkin = -pi sin t", bifurcation},
      {"section shift = sqrt(eps) with unit deviation ratio", shift_exactness},
      {"shifted order 1, unshifted order 1/2", orders},
      {"scalar projection tends to M-perp", projection_identity},
      {"structural invariants", invariants},
      {"flowed surface mode", flowed_mode},
      {"corollary suite on paper-example", corollaries},
      {"forced van der Pol self-consistency", van_der_pol},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("criterion %zu %s: %s (%s) [%.2fs]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.str().c_str(), secs);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
