#include "cycleshift/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

#include "cycleshift/errors.hpp"
#include "cycleshift/numerics.hpp"

namespace cycleshift {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSignThreshold = 1e-6;     // relative to max |M-perp| on the grid
constexpr double kNonzeroCosine = 1e-3;
constexpr double kZeroAnchorRatio = 1e-6;
constexpr int kMaxRefinements = 6;

struct ShiftOutcome {
  double delta = 0.0;
  double v_norm = kNaN;
  double residual = kNaN;
  int iterations = 0;
};

ShiftOutcome find_shift(const PerturbedProblem& problem, const PeriodicSolution& x_eps,
                        const Surface& surface, double r0, const SweepConfig& config) {
  ShiftOutcome out;
  if (config.exact_shift) {
    if (!problem.exact_shift) {
      throw Error(ErrorKind::InputDomain, "problem '" + problem.name + "' has no closed-form shift");
    }
    if (surface.mode() != SurfaceMode::section) {
      throw Error(ErrorKind::InputDomain, "the closed-form shift only holds in section mode");
    }
    out.delta = problem.exact_shift(x_eps.eps());
    return out;
  }
  const ShiftSolution s = solve_shift(x_eps, surface, r0, config.shift);
  out.delta = s.delta;
  out.v_norm = s.v.norm();
  out.residual = s.residual;
  out.iterations = s.iterations;
  return out;
}

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

std::pair<double, double> closest_approach(const PeriodicSolution& x, const Vector& point) {
  const int samples = 512;
  const double period = x.period();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const double d = (x(period * i / samples) - point).norm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  const double h = period / samples;
  const auto m = numerics::minimize([&](double t) { return (x(t) - point).norm(); },
                                    period * best / samples - h, period * best / samples + h);
  if (m.value < best_d) return {m.value, m.x};
  return {best_d, period * best / samples};
}

/// Solves at `eps` from the warm start; on failure walks there through
/// geometric intermediate values of eps.
PeriodicSolution continue_solution(const PerturbedProblem& problem, const LimitCycle& cycle, double eps,
                                   const std::optional<Vector>& warm, double warm_eps,
                                   const ShootingOptions& opts, int depth = 0) {
  try {
    return find_periodic_solution(problem, eps, cycle, warm, opts);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::ExistenceNotEstablished || !warm || depth >= kMaxRefinements ||
        !(warm_eps > eps)) {
      throw;
    }
  }
  const double mid = std::sqrt(eps * warm_eps);
  const PeriodicSolution half = continue_solution(problem, cycle, mid, warm, warm_eps, opts, depth + 1);
  return continue_solution(problem, cycle, eps, half.initial(), mid, opts, depth + 1);
}

}  // namespace

std::string to_string(SolutionSource source) {
  return source == SolutionSource::exact ? "exact" : "computed";
}

SolutionSource solution_source_from_string(const std::string& name) {
  if (name == "computed") return SolutionSource::computed;
  if (name == "exact") return SolutionSource::exact;
  throw Error(ErrorKind::InputDomain, "unknown solution source '" + name + "'");
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::inapplicable: return "inapplicable";
  }
  return "unknown";
}

Verdict anchor_trend(const std::vector<AnchorRow>& rows, std::string* note) {
  if (rows.empty()) {
    *note = "no successful eps points";
    return Verdict::inconclusive;
  }
  const bool all_zero = std::all_of(rows.begin(), rows.end(),
                                    [](const AnchorRow& r) { return r.ratio <= kZeroAnchorRatio; });
  if (all_zero) {
    *note = "anchor ratio at the zero floor for every eps";
    return Verdict::pass;
  }
  if (rows.size() < 3) {
    *note = "needs at least 3 eps points";
    return Verdict::inconclusive;
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].ratio < rows[i - 1].ratio)) {
      *note = "anchor ratio does not decrease strictly";
      return Verdict::fail;
    }
  }
  if (!(rows.back().ratio < 0.5 * rows.front().ratio)) {
    *note = "final anchor ratio is not below half the first";
    return Verdict::fail;
  }
  *note = "anchor ratio decreases strictly and halves across the grid";
  return Verdict::pass;
}

void validate(const SweepConfig& config) {
  if (config.eps.empty()) throw Error(ErrorKind::InputDomain, "eps: grid is empty");
  for (std::size_t i = 0; i < config.eps.size(); ++i) {
    const double e = config.eps[i];
    if (!(e > 0.0 && e <= 1.0)) {
      std::ostringstream os;
      os << "eps must lie in (0,1], got " << e;
      throw Error(ErrorKind::InputDomain, os.str(), e);
    }
    if (i > 0 && !(e < config.eps[i - 1])) {
      throw Error(ErrorKind::InputDomain, "eps: grid must be strictly decreasing", e);
    }
  }
  if (config.grid < 16) throw Error(ErrorKind::InputDomain, "grid: needs at least 16 points", config.grid);
  if (!(config.r0 >= 0.0)) throw Error(ErrorKind::InputDomain, "r0: must be positive", config.r0);
  if (config.threads < 1) throw Error(ErrorKind::InputDomain, "threads: must be at least 1", config.threads);
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& work) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) work(i);
    });
  }
}

int default_thread_count() {
  if (const char* env = std::getenv("CYCLESHIFT_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

OrderFit fit_order(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw Error(ErrorKind::InvalidData, "order fit needs at least 2 points");
  std::vector<double> xs, ys;
  for (const auto& [e, d] : points) {
    if (!(e > 0.0) || !(d > 0.0)) {
      std::ostringstream os;
      os << "order fit needs positive data, got (" << e << ", " << d << ")";
      throw Error(ErrorKind::InvalidData, os.str(), d);
    }
    xs.push_back(std::log(e));
    ys.push_back(std::log(d));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::InvalidData, "order fit needs distinct eps values");
  OrderFit fit;
  fit.fitted = true;
  fit.points = static_cast<int>(xs.size());
  fit.p = sxy / sxx;
  const double intercept = my - fit.p * mx;
  fit.c = std::exp(intercept);
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.p * xs[i] + intercept);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

std::vector<FamilyMember> solve_family(const PerturbedProblem& problem, const LimitCycle& cycle,
                                       const SweepConfig& config) {
  std::vector<FamilyMember> out;
  std::optional<Vector> warm;
  double warm_eps = 0.0;
  for (double e : config.eps) {
    FamilyMember m;
    m.eps = e;
    try {
      if (config.source == SolutionSource::exact) {
        m.solution = PeriodicSolution::exact(problem, e);
      } else {
        m.solution = continue_solution(problem, cycle, e, warm, warm_eps, config.shooting);
        warm = m.solution.initial();
        warm_eps = e;
      }
      m.ok = true;
    } catch (const Error& err) {
      m.error_kind = std::string(to_string(err.kind()));
      m.error = err.what();
    }
    out.push_back(std::move(m));
  }
  return out;
}

ConvergenceReport sweep(const PerturbedProblem& problem, const LimitCycle& cycle,
                        const SweepConfig& config) {
  validate(config);
  ConvergenceReport report;
  report.problem = problem.name;
  report.mode = config.mode;
  report.source = config.source;
  report.exact_shift = config.exact_shift;
  report.grid = config.grid;
  report.r0 = config.r0 > 0.0 ? config.r0 : default_r0(cycle);

  const Surface surface = build_surface(cycle, std::nullopt, config.mode);
  const std::vector<FamilyMember> family = solve_family(problem, cycle, config);
  report.records.resize(family.size());

  parallel_for(family.size(), config.threads, [&](std::size_t i) {
    const FamilyMember& m = family[i];
    SweepRecord& rec = report.records[i];
    rec.eps = m.eps;
    if (!m.ok) {
      rec.error_kind = m.error_kind;
      rec.error = m.error;
      return;
    }
    rec.residual_solution = m.solution.residual();
    rec.solution_iterations = m.solution.iterations();
    rec.warnings = m.solution.warnings();
    try {
      const ShiftOutcome s = find_shift(problem, m.solution, surface, report.r0, config);
      rec.delta = s.delta;
      rec.v_norm = s.v_norm;
      rec.residual_shift = s.residual;
      rec.shift_iterations = s.iterations;
      rec.sup_shifted = shifted_deviation(m.solution, cycle, s.delta, config.grid).sup;
      rec.sup_unshifted = shifted_deviation(m.solution, cycle, 0.0, config.grid).sup;
      rec.ok = true;
    } catch (const Error& err) {
      rec.error_kind = std::string(to_string(err.kind()));
      rec.error = err.what();
    }
  });

  std::vector<std::pair<double, double>> shifted, unshifted;
  for (const auto& rec : report.records) {
    if (!rec.ok) continue;
    report.bound_constant = std::max(report.bound_constant, rec.sup_shifted / rec.eps);
    if (rec.sup_shifted > 0.0) shifted.emplace_back(rec.eps, rec.sup_shifted);
    if (rec.sup_unshifted > 0.0) unshifted.emplace_back(rec.eps, rec.sup_unshifted);
  }
  auto fit = [](const std::vector<std::pair<double, double>>& pts) {
    if (pts.size() < 2) {
      OrderFit f;
      f.points = static_cast<int>(pts.size());
      f.note = "not fitted: needs at least 2 points";
      return f;
    }
    return fit_order(pts);
  };
  report.shifted = fit(shifted);
  report.unshifted = fit(unshifted);
  return report;
}

CorollaryReport corollary_checks(const PerturbedProblem& problem, const LimitCycle& cycle,
                                 const FloquetBasis& basis, const SweepConfig& config) {
  validate(config);
  CorollaryReport report;
  report.problem = problem.name;
  report.mode = config.mode;
  report.source = config.source;
  report.exact_shift = config.exact_shift;
  report.grid = config.grid;

  const std::vector<FloquetEntry> entries = basis.non_periodic();
  if (entries.empty()) {
    const std::string why = "no non-periodic eigenfunction";
    report.sign.note = report.bounds.note = report.avoidance.note = report.anchor.note = why;
    report.dichotomy.branch = "undetermined";
    report.dichotomy.note = why;
    return report;
  }

  const double period = cycle.period();
  const int m = config.grid;
  std::vector<double> grid(m);
  for (int j = 0; j < m; ++j) grid[j] = period * j / m;

  // M-perp on the grid and at 0 for every non-periodic eigenfunction.
  std::vector<std::vector<double>> mp(entries.size(), std::vector<double>(m));
  std::vector<double> threshold(entries.size());
  parallel_for(entries.size() * m, config.threads, [&](std::size_t k) {
    const std::size_t i = k / m;
    const std::size_t j = k % m;
    mp[i][j] = mperp(entries[i], cycle, problem, grid[j]);
  });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    double peak = 0.0;
    for (double v : mp[i]) peak = std::max(peak, std::abs(v));
    threshold[i] = kSignThreshold * peak;
  }

  const double r0 = config.r0 > 0.0 ? config.r0 : default_r0(cycle);
  const Surface surface = build_surface(cycle, std::nullopt, config.mode);
  const std::vector<FamilyMember> family = solve_family(problem, cycle, config);

  struct Point {
    double eps;
    PeriodicSolution solution;
    double delta;
  };
  std::vector<Point> points;
  for (const auto& f : family) {
    if (!f.ok) {
      report.failures.push_back({f.eps, f.error_kind, f.error});
      continue;
    }
    try {
      points.push_back({f.eps, f.solution, find_shift(problem, f.solution, surface, r0, config).delta});
    } catch (const Error& err) {
      report.failures.push_back({f.eps, std::string(to_string(err.kind())), err.what()});
    }
  }

  // Sign agreement of M-perp and the cosine.
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (const auto& p : points) {
      for (int j = 0; j < m; ++j) {
        SignCheck c;
        c.eigenfunction = entries[i].label();
        c.eps = p.eps;
        c.t = grid[j];
        c.mperp = mp[i][j];
        c.cosine = cosine(entries[i](grid[j]), p.solution(grid[j] + p.delta) - cycle.state(grid[j]));
        c.skipped = std::abs(c.mperp) <= threshold[i];
        c.agree = !c.skipped && ((c.mperp > 0.0 && c.cosine > 0.0) || (c.mperp < 0.0 && c.cosine < 0.0));
        if (c.skipped) {
          ++report.sign.skipped;
        } else if (c.agree) {
          ++report.sign.agreements;
        } else {
          ++report.sign.disagreements;
        }
        report.sign.checks.push_back(c);
      }
    }
  }
  if (report.sign.agreements + report.sign.disagreements == 0) {
    report.sign.verdict = Verdict::inapplicable;
    report.sign.note = points.empty() ? "no successful eps points" : "every grid point is below the sign threshold";
  } else {
    report.sign.verdict = report.sign.disagreements == 0 ? Verdict::pass : Verdict::fail;
  }

  // Two-sided bounds when some M-perp stays away from zero on the grid.
  int bounded = -1;
  for (std::size_t i = 0; i < entries.size() && bounded < 0; ++i) {
    double lowest = std::numeric_limits<double>::infinity();
    for (double v : mp[i]) lowest = std::min(lowest, std::abs(v));
    if (lowest > threshold[i] && lowest > 0.0) bounded = static_cast<int>(i);
  }
  if (bounded < 0) {
    report.bounds.note = "every M-perp vanishes somewhere on the grid";
  } else {
    report.bounds.eigenfunction = entries[bounded].label();
    for (const auto& p : points) {
      const DeviationProfile d = shifted_deviation(p.solution, cycle, p.delta, m);
      BoundRow row{p.eps, std::numeric_limits<double>::infinity(), 0.0};
      for (double v : d.d) {
        row.c1 = std::min(row.c1, v / p.eps);
        row.c2 = std::max(row.c2, v / p.eps);
      }
      report.bounds.rows.push_back(row);
    }
    if (report.bounds.rows.empty()) {
      report.bounds.verdict = Verdict::inconclusive;
      report.bounds.note = "no successful eps points";
    } else {
      double c1_lo = std::numeric_limits<double>::infinity(), c1_hi = 0.0;
      double c2_lo = std::numeric_limits<double>::infinity(), c2_hi = 0.0;
      bool ordered = true;
      for (const auto& r : report.bounds.rows) {
        ordered = ordered && r.c1 > 0.0 && r.c1 <= r.c2;
        c1_lo = std::min(c1_lo, r.c1);
        c1_hi = std::max(c1_hi, r.c1);
        c2_lo = std::min(c2_lo, r.c2);
        c2_hi = std::max(c2_hi, r.c2);
      }
      const bool stable = ordered && c1_hi <= 2.0 * c1_lo && c2_hi <= 2.0 * c2_lo;
      report.bounds.verdict = stable ? Verdict::pass : Verdict::fail;
      report.bounds.note = stable ? "0 < c1 <= c2, each stable within a factor 2 across eps"
                                  : "c1, c2 not ordered or not stable within a factor 2";
    }
  }

  // Avoidance of x0(0) when some M-perp(0) is nonzero.
  int avoiding = -1;
  for (std::size_t i = 0; i < entries.size() && avoiding < 0; ++i) {
    if (std::abs(mp[i][0]) > threshold[i] && mp[i][0] != 0.0) avoiding = static_cast<int>(i);
  }
  if (config.mode == SurfaceMode::section) {
    report.avoidance.annotation = "mode-mismatch: shifts come from the section surface";
  }
  if (avoiding < 0) {
    report.avoidance.note = "M-perp(0) vanishes for every non-periodic eigenfunction";
  } else {
    report.avoidance.eigenfunction = entries[avoiding].label();
    bool all = !points.empty();
    for (const auto& p : points) {
      const auto [dist, t] = closest_approach(p.solution, cycle.state(0.0));
      report.avoidance.rows.push_back({p.eps, dist, t});
      all = all && dist >= 1e-3 * p.eps;
    }
    report.avoidance.verdict = points.empty() ? Verdict::inconclusive
                               : all          ? Verdict::pass
                                              : Verdict::fail;
    report.avoidance.note = "pass when min_t |x_eps(t) - x0(0)| >= 1e-3 eps at every eps";
  }

  // Anchor ratio, its trend, and the cosine dichotomy.
  std::vector<Vector> anchor_diff;
  for (const auto& p : points) {
    const Vector diff = p.solution(p.delta) - cycle.state(0.0);
    anchor_diff.push_back(diff);
    report.anchor.rows.push_back({p.eps, diff.norm() / p.eps});
  }
  std::string trend_note;
  const Verdict trend = anchor_trend(report.anchor.rows, &trend_note);
  bool all_zero_at_0 = true;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    all_zero_at_0 = all_zero_at_0 && std::abs(mp[i][0]) <= threshold[i];
  }
  if (all_zero_at_0) {
    report.anchor.verdict = trend;
    report.anchor.note = trend_note;
  } else {
    report.anchor.note = "some M-perp(0) is nonzero; trend reported only (" + trend_note + ")";
  }

  double best_min_cos = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    double min_cos = points.empty() ? 0.0 : std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < points.size(); ++k) {
      CosineRow row;
      row.eps = points[k].eps;
      row.eigenfunction = entries[i].label();
      row.defined = anchor_diff[k].norm() > 0.0;
      row.cosine = row.defined ? cosine(entries[i].initial(), anchor_diff[k]) : 0.0;
      min_cos = std::min(min_cos, std::abs(row.cosine));
      report.dichotomy.rows.push_back(row);
    }
    if (min_cos >= kNonzeroCosine && min_cos > best_min_cos) {
      best_min_cos = min_cos;
      report.dichotomy.eigenfunction = entries[i].label();
    }
  }
  if (!report.dichotomy.eigenfunction.empty()) {
    report.dichotomy.branch = "nonzero-cosine";
    std::ostringstream os;
    os << "|cos| >= " << best_min_cos << " at every eps";
    report.dichotomy.note = os.str();
  } else if (trend == Verdict::pass) {
    report.dichotomy.branch = "limit-zero";
    report.dichotomy.note = trend_note;
  } else {
    report.dichotomy.branch = "undetermined";
    report.dichotomy.note = "no eigenfunction keeps |cos| >= 1e-3 and the anchor ratio trend is " +
                            to_string(trend);
  }

  for (std::size_t k = 0; k < points.size(); ++k) {
    AngleRow row;
    row.eps = points[k].eps;
    row.defined = anchor_diff[k].norm() > 0.0;
    if (row.defined) {
      for (const auto& e : entries) {
        row.max_abs_cosine = std::max(row.max_abs_cosine, std::abs(cosine(e.initial(), anchor_diff[k])));
      }
    }
    report.angles.push_back(row);
  }
  return report;
}

}  // namespace cycleshift
