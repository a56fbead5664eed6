#include "doctest.h"

#include <atomic>
#include <cmath>
#include <cstring>

#include "cycleshift/analysis.hpp"
#include "cycleshift/errors.hpp"
#include "cycleshift/problems.hpp"

using namespace cycleshift;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidData;
}

const ProblemInstance& example() {
  static const ProblemInstance inst = instantiate(registry_problem("paper-example"));
  return inst;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("fit_order on exact power laws") {
  OrderFit f = fit_order({{1e-2, 1e-2}, {1e-4, 1e-4}});
  CHECK(f.fitted);
  CHECK(f.p == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.c == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.residual < 1e-12);
  f = fit_order({{1e-2, 1e-1}, {1e-4, 1e-2}});
  CHECK(f.p == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(f.c == doctest::Approx(1.0).epsilon(1e-12));
  f = fit_order({{1e-1, 3e-2}, {1e-2, 3e-4}, {1e-3, 3e-6}});
  CHECK(f.p == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.c == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.points == 3);
}

TEST_CASE("fit_order rejects bad data") {
  CHECK(kind_of([] { fit_order({{1e-2, 0.0}, {1e-3, 1e-3}}); }) == ErrorKind::InvalidData);
  CHECK(kind_of([] { fit_order({{1e-2, -1.0}, {1e-3, 1e-3}}); }) == ErrorKind::InvalidData);
  CHECK(kind_of([] { fit_order({{1e-2, 1e-2}}); }) == ErrorKind::InvalidData);
  CHECK(kind_of([] { fit_order({{1e-2, 1e-2}, {1e-2, 1e-3}}); }) == ErrorKind::InvalidData);
}

TEST_CASE("sweep config validation names the field") {
  SweepConfig c;
  c.eps = {1e-2, 1e-3};
  CHECK_NOTHROW(validate(c));
  auto message = [](const SweepConfig& bad) {
    try {
      validate(bad);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InputDomain);
      return std::string(e.what());
    }
    return std::string();
  };
  SweepConfig bad = c;
  bad.eps = {0.0};
  CHECK(message(bad).find("eps must lie in (0,1]") != std::string::npos);
  bad.eps = {1e-3, 1e-2};
  CHECK(message(bad).find("eps") == 0);
  bad.eps = {};
  CHECK(message(bad).find("eps") == 0);
  bad = c;
  bad.grid = 8;
  CHECK(message(bad).find("grid") == 0);
  bad = c;
  bad.threads = 0;
  CHECK(message(bad).find("threads") == 0);
  CHECK(solution_source_from_string("exact") == SolutionSource::exact);
  CHECK(kind_of([] { solution_source_from_string("guess"); }) == ErrorKind::InputDomain);
}

TEST_CASE("parallel_for visits every index once") {
  for (int threads : {1, 3, 16}) {
    std::vector<std::atomic<int>> hits(101);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("sweep on the closed-form family: orders and bound constant") {
  SweepConfig c;
  c.eps = {1e-2, 1e-3, 1e-4, 1e-5};
  c.source = SolutionSource::exact;
  const ConvergenceReport r = sweep(example().problem, example().cycle, c);
  REQUIRE(r.records.size() == 4);
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    CHECK(r.records[i].ok);
    CHECK(r.records[i].eps == c.eps[i]);
    CHECK(std::abs(r.records[i].delta - std::sqrt(c.eps[i])) < 1e-9);
  }
  CHECK(r.shifted.fitted);
  CHECK(std::abs(r.shifted.p - 1.0) <= 0.02);
  CHECK(std::abs(r.unshifted.p - 0.5) <= 0.05);
  CHECK(std::abs(r.bound_constant - 1.0) <= 0.01);

  // The bound constant over a sub-grid never exceeds the full one.
  SweepConfig sub = c;
  sub.eps = {1e-3, 1e-5};
  CHECK(sweep(example().problem, example().cycle, sub).bound_constant <= r.bound_constant);
}

TEST_CASE("single-point grid leaves the orders unfitted") {
  SweepConfig c;
  c.eps = {1e-3};
  const ConvergenceReport r = sweep(example().problem, example().cycle, c);
  CHECK(r.records.front().ok);
  CHECK_FALSE(r.shifted.fitted);
  CHECK_FALSE(r.unshifted.fitted);
  CHECK(r.shifted.note.find("at least 2") != std::string::npos);
}

TEST_CASE("sweeps are bit-identical across thread counts") {
  SweepConfig c;
  c.eps = {1e-2, 1e-3, 1e-4};
  c.threads = 1;
  const ConvergenceReport a = sweep(example().problem, example().cycle, c);
  c.threads = 4;
  const ConvergenceReport b = sweep(example().problem, example().cycle, c);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(same_bits(a.records[i].delta, b.records[i].delta));
    CHECK(same_bits(a.records[i].sup_shifted, b.records[i].sup_shifted));
    CHECK(same_bits(a.records[i].sup_unshifted, b.records[i].sup_unshifted));
  }
  CHECK(same_bits(a.shifted.p, b.shifted.p));
}

TEST_CASE("per-eps failures are recorded without aborting the sweep") {
  SweepConfig c;
  c.eps = {1e-2, 1e-3};
  c.mode = SurfaceMode::flowed;
  const ConvergenceReport r = sweep(example().problem, example().cycle, c);
  REQUIRE(r.records.size() == 2);
  for (const auto& rec : r.records) {
    CHECK_FALSE(rec.ok);
    CHECK(rec.error_kind == "shift-not-found");
  }
  CHECK_FALSE(r.shifted.fitted);
}

TEST_CASE("continuation bridges a wide gap in eps") {
  SweepConfig c;
  c.eps = {1e-1, 1e-5};
  const auto family = solve_family(example().problem, example().cycle, c);
  REQUIRE(family.size() == 2);
  CHECK(family[1].ok);
  CHECK(family[1].solution.residual() < 1e-10);
}

TEST_CASE("corollary checks on the closed-form family") {
  const FloquetBasis basis = floquet_basis(example().cycle);
  SweepConfig c;
  c.eps = {1e-3, 1e-4};
  c.grid = 16;
  c.source = SolutionSource::exact;
  c.exact_shift = true;
  const CorollaryReport r = corollary_checks(example().problem, example().cycle, basis, c);
  CHECK(r.failures.empty());
  CHECK(r.sign.verdict == Verdict::pass);
  CHECK(r.sign.agreements == 32);
  CHECK(r.sign.skipped == 0);
  for (const auto& s : r.sign.checks) CHECK(s.cosine == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.bounds.verdict == Verdict::pass);
  for (const auto& b : r.bounds.rows) {
    CHECK(b.c1 >= 0.9);
    CHECK(b.c2 <= 1.1);
  }
  CHECK(r.avoidance.verdict == Verdict::pass);
  CHECK(r.avoidance.annotation.find("mode-mismatch") != std::string::npos);
  for (const auto& a : r.avoidance.rows) CHECK(a.min_distance >= 0.9 * a.eps);
  CHECK(r.anchor.verdict == Verdict::inapplicable);
  CHECK(r.dichotomy.branch == "nonzero-cosine");
  CHECK(r.dichotomy.eigenfunction == "z1");
  REQUIRE(r.angles.size() == 2);
  for (const auto& a : r.angles) CHECK(a.max_abs_cosine == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sign verdicts are invariant under positive rescaling") {
  FloquetBasis basis = floquet_basis(example().cycle);
  SweepConfig c;
  c.eps = {1e-3};
  c.grid = 16;
  const CorollaryReport a = corollary_checks(example().problem, example().cycle, basis, c);
  basis.entries[0] = basis.entries[0].scaled(7.5);
  const CorollaryReport b = corollary_checks(example().problem, example().cycle, basis, c);
  REQUIRE(a.sign.checks.size() == b.sign.checks.size());
  for (std::size_t i = 0; i < a.sign.checks.size(); ++i) {
    CHECK(a.sign.checks[i].agree == b.sign.checks[i].agree);
    CHECK(a.sign.checks[i].skipped == b.sign.checks[i].skipped);
  }
  CHECK(a.sign.verdict == b.sign.verdict);
}

TEST_CASE("circle3d: a direction with vanishing M-perp is skipped, not contradicted") {
  const ProblemInstance inst = instantiate(registry_problem("circle3d"));
  const FloquetBasis basis = floquet_basis(inst.cycle);
  SweepConfig c;
  c.eps = {1e-3, 1e-4};
  c.grid = 16;
  const CorollaryReport r = corollary_checks(inst.problem, inst.cycle, basis, c);
  CHECK(r.sign.verdict == Verdict::pass);
  CHECK(r.sign.agreements == 32);
  CHECK(r.sign.skipped == 32);
  CHECK(r.bounds.eigenfunction == "z1");
}

TEST_CASE("basis without non-periodic entries makes the corollaries inapplicable") {
  FloquetBasis basis = floquet_basis(example().cycle);
  basis.entries.erase(basis.entries.begin());
  SweepConfig c;
  c.eps = {1e-3};
  const CorollaryReport r = corollary_checks(example().problem, example().cycle, basis, c);
  CHECK(r.sign.verdict == Verdict::inapplicable);
  CHECK(r.bounds.verdict == Verdict::inapplicable);
  CHECK(r.avoidance.verdict == Verdict::inapplicable);
  CHECK(r.dichotomy.branch == "undetermined");
}

TEST_CASE("anchor trend surrogate") {
  std::string note;
  CHECK(anchor_trend({}, &note) == Verdict::inconclusive);
  CHECK(anchor_trend({{1e-2, 0.3}, {1e-3, 0.1}}, &note) == Verdict::inconclusive);
  CHECK(anchor_trend({{1e-2, 0.3}, {1e-3, 0.1}, {1e-4, 0.03}}, &note) == Verdict::pass);
  CHECK(anchor_trend({{1e-2, 0.3}, {1e-3, 0.4}, {1e-4, 0.03}}, &note) == Verdict::fail);
  CHECK(anchor_trend({{1e-2, 0.3}, {1e-3, 0.29}, {1e-4, 0.28}}, &note) == Verdict::fail);
  CHECK(note.find("half") != std::string::npos);
  CHECK(anchor_trend({{1e-2, 1e-9}, {1e-3, 2e-9}}, &note) == Verdict::pass);
}
